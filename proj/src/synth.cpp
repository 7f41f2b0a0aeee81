#include "trifuse/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "trifuse/common.hpp"
#include "trifuse/features.hpp"

namespace trifuse {
namespace {

// Raw-frame spacing of the rows a sampled video window actually reads.
constexpr std::uint32_t kVideoGrid = kWindowFrames / kVideoSamplesPerWindow;

// Rows of an orthonormal set, built by Gram-Schmidt over normal draws.
std::vector<std::vector<double>> orthonormal_set(Rng& rng, std::uint32_t dim,
                                                 std::uint32_t count) {
    std::vector<std::vector<double>> basis;
    basis.reserve(count);
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        for (const auto& b : basis) {
            double dot = 0.0;
            for (std::uint32_t j = 0; j < dim; ++j) dot += v[j] * b[j];
            for (std::uint32_t j = 0; j < dim; ++j) v[j] -= dot * b[j];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis;
}

FeatureSequence make_video(std::uint32_t frames, std::uint32_t dim,
                           const std::vector<std::vector<double>>& tags,
                           const std::vector<double>& w, const std::vector<double>& c,
                           double noise, Rng& rng) {
    const std::uint32_t k = static_cast<std::uint32_t>(tags.size());
    std::vector<float> data(static_cast<std::size_t>(frames) * dim);
    for (std::uint32_t t = 0; t < frames; ++t) {
        const bool on_grid = t % kVideoGrid == 0;
        const std::uint32_t m = on_grid ? (t / kVideoGrid) % k : 0;
        for (std::uint32_t j = 0; j < dim; ++j) {
            double v = noise * rng.normal();
            if (on_grid) v += tags[m][j] + c[m] * w[j];
            data[static_cast<std::size_t>(t) * dim + j] = static_cast<float>(v);
        }
    }
    return FeatureSequence::make(Modality::Video, frames, dim, std::move(data));
}

// Every frame carries the same content row plus fresh noise.
FeatureSequence make_dense(Modality mod, std::uint32_t frames, std::uint32_t dim,
                           const std::vector<double>& row, double noise, Rng& rng) {
    std::vector<float> data(static_cast<std::size_t>(frames) * dim);
    for (std::uint32_t t = 0; t < frames; ++t)
        for (std::uint32_t j = 0; j < dim; ++j)
            data[static_cast<std::size_t>(t) * dim + j] =
                static_cast<float>(row[j] + noise * rng.normal());
    return FeatureSequence::make(mod, frames, dim, std::move(data));
}

std::uint32_t draw_frames(Rng& rng) {
    const double r = rng.uniform();
    if (r < 0.70) return 64;
    if (r < 0.80) return 48;
    constexpr std::array<std::uint32_t, 4> longer = {80, 96, 112, 128};
    return longer[rng.below(longer.size())];
}

}  // namespace

Manifest generate_synthetic(const SynthConfig& cfg) {
    if (cfg.n_clips < 10) throw ContractError("synth: n_clips must be >= 10");
    if (cfg.d_v < 4 || cfg.d_i < 4 || cfg.d_t < 4)
        throw ContractError("synth: feature dims must be >= 4");
    if (cfg.n_slots < 2 || kVideoSamplesPerWindow % cfg.n_slots != 0)
        throw ContractError("synth: n_slots must divide the video samples per window");
    if (cfg.d_v < cfg.n_slots + 1 || cfg.d_i < cfg.n_slots + 1)
        throw ContractError("synth: video/image dims too small for the tag sets");
    if (cfg.noise < 0.0) throw ContractError("synth: noise must be >= 0");
    if (cfg.out_dir.empty()) throw ContractError("synth: out_dir is required");

    namespace fs = std::filesystem;
    const fs::path feat_dir = cfg.out_dir / "features";
    fs::create_directories(feat_dir);

    // Projection directions are shared by every clip so folds stay
    // comparable. Video and image each get n_slots tags plus one value
    // carrier; text gets one direction per observed coordinate.
    Rng tag_rng(derive_seed(cfg.seed, 0xF00D));
    auto video_dirs = orthonormal_set(tag_rng, cfg.d_v, cfg.n_slots + 1);
    const std::vector<double> w_v = std::move(video_dirs.back());
    video_dirs.pop_back();
    auto image_dirs = orthonormal_set(tag_rng, cfg.d_i, cfg.n_slots + 1);
    const std::vector<double> w_i = std::move(image_dirs.back());
    image_dirs.pop_back();
    const auto text_dirs = orthonormal_set(tag_rng, cfg.d_t, 2);

    Manifest man;
    man.dir = cfg.out_dir;
    man.records.reserve(cfg.n_clips);

    char name[64];
    for (std::size_t c = 0; c < cfg.n_clips; ++c) {
        Rng rng(derive_seed(cfg.seed, 1000 + c));

        std::array<double, 4> u;
        for (double& x : u) x = rng.normal();
        const std::uint32_t r = static_cast<std::uint32_t>(rng.below(cfg.n_slots));
        std::vector<double> slot_values(cfg.n_slots);
        for (std::uint32_t k = 0; k < cfg.n_slots; ++k)
            slot_values[k] = k == r ? u[2] : rng.normal();
        const std::uint32_t frames = draw_frames(rng);

        const auto video =
            make_video(frames, cfg.d_v, video_dirs, w_v, slot_values, cfg.noise, rng);
        std::vector<double> image_row(cfg.d_i);
        for (std::uint32_t j = 0; j < cfg.d_i; ++j)
            image_row[j] = image_dirs[r][j] + u[0] * w_i[j];
        const auto image =
            make_dense(Modality::Image, frames, cfg.d_i, image_row, cfg.noise, rng);
        std::vector<double> text_row(cfg.d_t);
        for (std::uint32_t j = 0; j < cfg.d_t; ++j)
            text_row[j] = u[1] * text_dirs[0][j] + u[3] * text_dirs[1][j];
        const auto text =
            make_dense(Modality::Text, frames, cfg.d_t, text_row, cfg.noise, rng);

        ManifestRecord rec;
        std::snprintf(name, sizeof name, "clip_%04zu", c);
        rec.id = name;
        rec.fold = static_cast<int>(c % 5) + 1;
        if (cfg.task == Task::Classification) {
            rec.label = Label::classification(u[0] * u[1] + u[2] > 0.0 ? 1 : 0);
        } else {
            rec.label = Label::regression(std::tanh(u[0] + u[2]), std::tanh(u[1] + u[3]));
        }
        for (Modality m : {Modality::Video, Modality::Image, Modality::Text}) {
            std::snprintf(name, sizeof name, "features/clip_%04zu_%s.mmfb", c,
                          modality_name(m).c_str());
            const FeatureSequence& seq =
                m == Modality::Video ? video : (m == Modality::Image ? image : text);
            write_features(cfg.out_dir / name, seq);
            (m == Modality::Video   ? rec.video_path
             : m == Modality::Image ? rec.image_path
                                    : rec.text_path) = name;
        }
        man.records.push_back(std::move(rec));
    }

    write_manifest(cfg.out_dir / "manifest.jsonl", man);
    return man;
}

}  // namespace trifuse
