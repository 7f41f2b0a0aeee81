#include "trifuse/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace trifuse {

namespace {

static_assert(sizeof(float) == 4 && sizeof(double) == 8);

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, std::uint64_t offset, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(std::string("truncated ") + what, offset);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename Word, typename Float>
void put_le(std::ostream& out, Float f) {
    Word w = std::bit_cast<Word>(f);
    char b[sizeof(Word)];
    for (std::size_t i = 0; i < sizeof(Word); ++i) b[i] = static_cast<char>((w >> (8 * i)) & 0xFF);
    out.write(b, sizeof(Word));
}

template <typename Word, typename Float>
Float get_le(std::istream& in, std::uint64_t offset, const char* what) {
    unsigned char b[sizeof(Word)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(Word)))
        throw ParseError(std::string("truncated ") + what, offset);
    Word w = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) w |= static_cast<Word>(b[i]) << (8 * i);
    return std::bit_cast<Float>(w);
}

}  // namespace

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::Video: return "video";
        case Modality::Image: return "image";
        case Modality::Text: return "text";
    }
    return "?";
}

FeatureSequence FeatureSequence::make(Modality m, std::uint32_t t, std::uint32_t d,
                                      std::vector<float> values) {
    if (t < 1 || d < 1)
        throw ContractError("feature sequence needs T >= 1 and d >= 1, got T=" +
                            std::to_string(t) + " d=" + std::to_string(d));
    if (values.size() != static_cast<std::size_t>(t) * d)
        throw ContractError("feature sequence data length " + std::to_string(values.size()) +
                            " does not match T*d=" + std::to_string(std::size_t(t) * d));
    for (float v : values)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    return FeatureSequence{m, t, d, std::move(values)};
}

std::vector<std::size_t> window_starts(std::size_t n_frames, std::size_t window,
                                       std::size_t stride) {
    if (n_frames < 1) throw ContractError("window_starts: n_frames must be >= 1");
    if (stride < 1) throw ContractError("window_starts: stride must be >= 1");
    if (n_frames < window) return {0};
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + window <= n_frames; s += stride) starts.push_back(s);
    return starts;
}

std::vector<std::size_t> uniform_subsample(std::size_t window, std::size_t k) {
    if (k < 1 || k > window)
        throw ContractError("uniform_subsample: need 1 <= k <= window, got k=" +
                            std::to_string(k) + " window=" + std::to_string(window));
    std::vector<std::size_t> idx(k);
    for (std::size_t j = 0; j < k; ++j) idx[j] = j * window / k;
    return idx;
}

FeatureSequence extract_window(const FeatureSequence& seq, std::size_t start,
                               const std::vector<std::size_t>& offsets) {
    const std::size_t last = seq.timesteps - 1;
    std::vector<float> rows;
    rows.reserve(offsets.size() * seq.dim);
    for (std::size_t off : offsets) {
        const std::size_t t = std::min(start + off, last);  // pad: repeat last frame
        rows.insert(rows.end(), seq.data.begin() + t * seq.dim,
                    seq.data.begin() + (t + 1) * seq.dim);
    }
    return FeatureSequence::make(seq.modality, static_cast<std::uint32_t>(offsets.size()),
                                 seq.dim, std::move(rows));
}

FeatureSequence augment(const FeatureSequence& x, double sigma, double mask_p, Rng& rng) {
    if (sigma < 0.0) throw ContractError("augment: sigma must be >= 0");
    if (mask_p < 0.0 || mask_p > 1.0) throw ContractError("augment: mask_p must be in [0,1]");
    FeatureSequence out = x;
    if (sigma > 0.0) {
        for (float& v : out.data) v = static_cast<float>(v + sigma * rng.normal());
    }
    if (mask_p > 0.0) {
        for (std::uint32_t t = 0; t < out.timesteps; ++t) {
            if (rng.uniform() < mask_p) {
                for (std::uint32_t j = 0; j < out.dim; ++j) out.at(t, j) = 0.0f;
            }
        }
    }
    return out;
}

// ---- container IO ----------------------------------------------------------

void write_features(std::ostream& out, const FeatureSequence& seq) {
    out.write(kFeatureMagic, 4);
    put_u32(out, kFeatureVersionF32);
    put_u32(out, seq.timesteps);
    put_u32(out, seq.dim);
    for (float v : seq.data) put_le<std::uint32_t>(out, v);
    if (!out) throw DataError("feature write failed");
}

FeatureSequence read_features(std::istream& in, Modality modality) {
    char magic[4];
    if (!in.read(magic, 4)) throw ParseError("truncated magic", 0);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0) throw ParseError("bad magic", 0);
    const std::uint32_t version = get_u32(in, 4, "version");
    if (version != kFeatureVersionF32)
        throw ParseError("unsupported version " + std::to_string(version), 4);
    const std::uint32_t t = get_u32(in, 8, "timestep count");
    const std::uint32_t d = get_u32(in, 12, "feature dim");
    if (t < 1 || d < 1)
        throw ParseError("invalid dims T=" + std::to_string(t) + " d=" + std::to_string(d), 8);
    std::vector<float> data(static_cast<std::size_t>(t) * d);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::uint64_t off = kFeatureHeaderBytes + i * 4;
        const float v = get_le<std::uint32_t, float>(in, off, "payload");
        if (!std::isfinite(v))
            throw DataError("non-finite payload value at byte offset " + std::to_string(off));
        data[i] = v;
    }
    return FeatureSequence{modality, t, d, std::move(data)};
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    write_features(out, seq);
}

FeatureSequence read_features(const std::filesystem::path& path, Modality modality) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path.string());
    try {
        return read_features(in, modality);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset);
    }
}

void write_f64_block(std::ostream& out, const std::vector<double>& values,
                     std::uint32_t rows, std::uint32_t cols) {
    if (values.size() != static_cast<std::size_t>(rows) * cols)
        throw ContractError("f64 block size mismatch");
    out.write(kFeatureMagic, 4);
    put_u32(out, kFeatureVersionF64);
    put_u32(out, rows);
    put_u32(out, cols);
    for (double v : values) put_le<std::uint64_t>(out, v);
    if (!out) throw DataError("f64 block write failed");
}

std::vector<double> read_f64_block(std::istream& in, std::uint32_t& rows, std::uint32_t& cols) {
    char magic[4];
    if (!in.read(magic, 4)) throw ParseError("truncated magic", 0);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0) throw ParseError("bad magic", 0);
    const std::uint32_t version = get_u32(in, 4, "version");
    if (version != kFeatureVersionF64)
        throw ParseError("expected float64 block, version " + std::to_string(version), 4);
    rows = get_u32(in, 8, "rows");
    cols = get_u32(in, 12, "cols");
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = get_le<std::uint64_t, double>(in, kFeatureHeaderBytes + i * 8, "payload");
    return data;
}

}  // namespace trifuse
