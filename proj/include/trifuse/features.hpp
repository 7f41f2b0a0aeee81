#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "trifuse/common.hpp"

namespace trifuse {

enum class Modality { Video, Image, Text };

std::string modality_name(Modality m);

/// A T x d matrix of per-timestep features for one modality. Stored as
/// float32, matching the on-disk payload, so write-then-read is the identity.
struct FeatureSequence {
    Modality modality = Modality::Video;
    std::uint32_t timesteps = 0;  // T
    std::uint32_t dim = 0;        // d
    std::vector<float> data;      // row-major, T*d entries

    static FeatureSequence make(Modality m, std::uint32_t t, std::uint32_t d,
                                std::vector<float> values);

    float at(std::size_t t, std::size_t j) const { return data[t * dim + j]; }
    float& at(std::size_t t, std::size_t j) { return data[t * dim + j]; }
};

inline constexpr std::uint32_t kWindowFrames = 64;
inline constexpr std::uint32_t kVideoSamplesPerWindow = 16;
inline constexpr std::uint32_t kImageSamplesPerWindow = 16;
inline constexpr std::uint32_t kTextSamplesPerWindow = 4;
inline constexpr std::uint32_t kDefaultStride = 16;

/// Window start offsets: 0, stride, 2*stride, ... while start + window fits.
/// A clip shorter than the window yields [0]; the caller pads by repeating
/// the last frame's features.
std::vector<std::size_t> window_starts(std::size_t n_frames, std::size_t window = kWindowFrames,
                                       std::size_t stride = kDefaultStride);

/// k indices uniformly spread over [0, window): floor(j * window / k).
/// Strictly increasing for every 1 <= k <= window.
std::vector<std::size_t> uniform_subsample(std::size_t window, std::size_t k);

/// Rows of `seq` at window-relative indices `offsets` starting at `start`,
/// repeating the final available row when the clip is shorter than the
/// window.
FeatureSequence extract_window(const FeatureSequence& seq, std::size_t start,
                               const std::vector<std::size_t>& offsets);

/// Train-time feature augmentation: iid Gaussian noise N(0, sigma^2) per
/// entry, then each timestep row is zeroed independently with probability
/// mask_p. (0, 0) is the identity.
FeatureSequence augment(const FeatureSequence& x, double sigma, double mask_p, Rng& rng);

// Binary feature container, little-endian:
//   magic "MMFB" | u32 version | u32 T | u32 d | T*d float32 row-major
// Version 1 stores float32 payloads (feature files). Version 2 stores
// float64 and is used by checkpoints, which must round-trip bit-exactly.
inline constexpr char kFeatureMagic[4] = {'M', 'M', 'F', 'B'};
inline constexpr std::uint32_t kFeatureVersionF32 = 1;
inline constexpr std::uint32_t kFeatureVersionF64 = 2;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

void write_features(std::ostream& out, const FeatureSequence& seq);
FeatureSequence read_features(std::istream& in, Modality modality);

void write_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::filesystem::path& path, Modality modality);

// Version-2 (float64) payloads, same header layout. Rows/cols land in the
// T/d fields.
void write_f64_block(std::ostream& out, const std::vector<double>& values,
                     std::uint32_t rows, std::uint32_t cols);
std::vector<double> read_f64_block(std::istream& in, std::uint32_t& rows, std::uint32_t& cols);

}  // namespace trifuse
