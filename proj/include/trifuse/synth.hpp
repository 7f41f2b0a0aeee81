#pragma once

#include <cstdint>
#include <filesystem>

#include "trifuse/dataset.hpp"

namespace trifuse {

/// Synthetic benchmark generator. Each clip draws a latent u in R^4; every
/// modality observes a noisy linear projection of a different subset of u's
/// coordinates (video: {u3}, image: {u1}, text: {u2,u4}), so no single
/// stream determines the label:
///   classification: y = 1  iff  u1*u2 + u3 > 0
///   regression:     (tanh(u1+u3), tanh(u2+u4))
/// Temporal structure is a keyed lookup. Video frames on the sampled grid
/// cycle through K tagged slots, slot k carrying tag_k + c_k * w; one
/// clip-random slot r holds c_r = u3, the rest hold independent noise
/// values. Image frames all carry tag'_r + u1 * w' (the query tag plus its
/// own coordinate) and text frames all carry u2*v1 + u4*v2. Tags are
/// orthonormal per stream. K divides the video samples per window, so every
/// window covers every slot. Reading u3 out of a window therefore means
/// matching the image tag against the K tagged video rows and copying that
/// row's value, which is one cross-attention hop; a fixed-size summary of
/// the video stream has to store the whole slot map and leave the matching
/// to the head. Both label terms need two streams: the product u1*u2 pairs
/// image with text, and the keyed u3 pairs image with video. Image-only and
/// text-only posteriors sit at exactly 1/2; video-only retains a diluted
/// trace of u3 because nothing inside the video stream marks which slot
/// holds it.
struct SynthConfig {
    std::size_t n_clips = 200;
    std::uint32_t d_v = 16;
    std::uint32_t d_i = 16;
    std::uint32_t d_t = 12;
    Task task = Task::Classification;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;

    // Generator shape knobs; defaults are what the benchmark uses. n_slots
    // must divide the video samples per window and the video/image dims must
    // fit their tag sets plus one value direction.
    std::uint32_t n_slots = 4;
    double noise = 0.02;
};

/// Writes out_dir/manifest.jsonl plus out_dir/features/*.mmfb and returns the
/// manifest. Fixed seed gives byte-identical output; clip c draws from a
/// sub-stream derived from (seed, c), so generation order is immaterial.
Manifest generate_synthetic(const SynthConfig& cfg);

}  // namespace trifuse
