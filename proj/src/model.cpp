#include "trifuse/model.hpp"

namespace trifuse {

using ad::Node;
using ad::Tape;

namespace {

constexpr std::uint64_t kInitTag = 0xA11C;

void register_gru(std::vector<std::pair<std::string, Node*>>& out,
                  const std::string& prefix, const GruParams& g) {
    out.emplace_back(prefix + ".wr", g.wr);
    out.emplace_back(prefix + ".wz", g.wz);
    out.emplace_back(prefix + ".wh", g.wh);
    out.emplace_back(prefix + ".ur", g.ur);
    out.emplace_back(prefix + ".uz", g.uz);
    out.emplace_back(prefix + ".uh", g.uh);
    out.emplace_back(prefix + ".br", g.br);
    out.emplace_back(prefix + ".bz", g.bz);
    out.emplace_back(prefix + ".bh", g.bh);
}

void register_attention(std::vector<std::pair<std::string, Node*>>& out,
                        const std::string& prefix, const AttentionParams& a) {
    out.emplace_back(prefix + ".wq", a.wq);
    out.emplace_back(prefix + ".wk", a.wk);
    out.emplace_back(prefix + ".wv", a.wv);
}

// Constant input nodes: xs[t] is the [B x d] stack of timestep t across the
// batch, cast from the stored float32.
std::vector<Node*> stream_inputs(Tape& tape,
                                 const std::vector<const WindowSample*>& batch,
                                 const FeatureSequence WindowSample::* stream,
                                 std::size_t steps, std::size_t dim) {
    const std::size_t b = batch.size();
    std::vector<Node*> xs(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> buf(b * dim);
        for (std::size_t i = 0; i < b; ++i) {
            const FeatureSequence& seq = batch[i]->*stream;
            for (std::size_t j = 0; j < dim; ++j)
                buf[i * dim + j] = static_cast<double>(seq.at(t, j));
        }
        xs[t] = tape.leaf(Tensor({b, dim}, std::move(buf)));
    }
    return xs;
}

void check_stream(const FeatureSequence& seq, std::size_t steps, std::size_t dim,
                  const char* which) {
    if (seq.timesteps != steps || seq.dim != dim)
        throw ContractError(std::string("model: ") + which + " window must be " +
                            std::to_string(steps) + " x " + std::to_string(dim) +
                            ", got " + std::to_string(seq.timesteps) + " x " +
                            std::to_string(seq.dim));
}

}  // namespace

FusionMode fusion_mode_from_name(const std::string& name) {
    if (name == "cross") return FusionMode::Cross;
    if (name == "concat") return FusionMode::Concat;
    throw ConfigError("fusion must be \"cross\" or \"concat\", got \"" + name + "\"");
}

std::string fusion_mode_name(FusionMode m) {
    return m == FusionMode::Cross ? "cross" : "concat";
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.d_v == 0 || cfg.d_i == 0 || cfg.d_t == 0 || cfg.d_h == 0)
        throw ContractError("model: dims must be positive");
    if (!cfg.use_video && !cfg.use_image && !cfg.use_text)
        throw ConfigError("model: at least one modality must be enabled");

    Rng rng(derive_seed(seed, kInitTag));
    enc_v_ = GruParams::init(param_tape_, cfg.d_v, cfg.d_h, rng);
    enc_i_ = GruParams::init(param_tape_, cfg.d_i, cfg.d_h, rng);
    enc_t_ = GruParams::init(param_tape_, cfg.d_t, cfg.d_h, rng);
    register_gru(named_, "video", enc_v_);
    register_gru(named_, "image", enc_i_);
    register_gru(named_, "text", enc_t_);

    if (cfg.fusion == FusionMode::Cross) {
        fus_ = FusionParams::init(param_tape_, cfg.d_h, rng);
        register_attention(named_, "fusion.iv", fus_.iv);
        register_attention(named_, "fusion.it", fus_.it);
    }
    head_ = HeadParams::init(param_tape_, cfg.fused_dim(), cfg.d_h, cfg.out_dim(), rng);
    named_.emplace_back("head.w1", head_.w1);
    named_.emplace_back("head.b1", head_.b1);
    named_.emplace_back("head.w2", head_.w2);
    named_.emplace_back("head.b2", head_.b2);

    if (cfg.autoencoder) {
        dec_ = DecoderParams::init(param_tape_, cfg.fused_dim(), 3 * cfg.d_h, rng);
        named_.emplace_back("decoder.wd", dec_.wd);
        named_.emplace_back("decoder.bd", dec_.bd);
    }
    flat_.reserve(named_.size());
    for (const auto& [name, node] : named_) flat_.push_back(node);
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (Node* p : flat_) n += p->value.numel();
    return n;
}

Model::Forward Model::forward(Tape& tape, const std::vector<const WindowSample*>& batch) {
    if (batch.empty()) throw ContractError("model: empty batch");
    const std::size_t b = batch.size();
    for (const WindowSample* s : batch) {
        check_stream(s->video, kVideoSamplesPerWindow, cfg_.d_v, "video");
        check_stream(s->image, kImageSamplesPerWindow, cfg_.d_i, "image");
        check_stream(s->text, kTextSamplesPerWindow, cfg_.d_t, "text");
    }

    // A disabled stream contributes all-zero encodings; the same zero node
    // serves every timestep.
    auto encode = [&](bool enabled, const GruParams& enc,
                      const FeatureSequence WindowSample::* stream,
                      std::size_t steps, std::size_t dim) -> std::vector<Node*> {
        if (!enabled) {
            Node* z = tape.leaf(Tensor::zeros({b, cfg_.d_h}));
            return std::vector<Node*>(steps, z);
        }
        return gru_forward(tape, enc, stream_inputs(tape, batch, stream, steps, dim));
    };
    const std::vector<Node*> hs_v = encode(cfg_.use_video, enc_v_, &WindowSample::video,
                                           kVideoSamplesPerWindow, cfg_.d_v);
    const std::vector<Node*> hs_i = encode(cfg_.use_image, enc_i_, &WindowSample::image,
                                           kImageSamplesPerWindow, cfg_.d_i);
    const std::vector<Node*> hs_t = encode(cfg_.use_text, enc_t_, &WindowSample::text,
                                           kTextSamplesPerWindow, cfg_.d_t);

    Node* finals = ad::concat_cols(tape, {hs_v.back(), hs_i.back(), hs_t.back()});
    Node* fused = cfg_.fusion == FusionMode::Cross
                      ? fuse(tape, fus_, hs_i.back(), hs_v, hs_t, cfg_.kv)
                      : finals;
    Node* out = head_forward(tape, head_, fused);
    return Forward{out, fused, finals};
}

ad::Node* Model::loss(Tape& tape, const std::vector<const WindowSample*>& batch,
                      double lambda) {
    Forward f = forward(tape, batch);
    Node* task = nullptr;
    if (cfg_.task == Task::Classification) {
        std::vector<int> y;
        y.reserve(batch.size());
        for (const WindowSample* s : batch) {
            if (s->label.task != Task::Classification)
                throw ConfigError("model: regression label in classification run");
            y.push_back(s->label.cls);
        }
        task = focal_loss(tape, f.out, y);
    } else {
        std::vector<double> tgt(batch.size() * 2);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i]->label.task != Task::Regression)
                throw ConfigError("model: classification label in regression run");
            tgt[2 * i] = batch[i]->label.valence;
            tgt[2 * i + 1] = batch[i]->label.arousal;
        }
        task = mse_loss(tape, f.out, tape.leaf(Tensor({batch.size(), 2}, std::move(tgt))));
    }
    Node* recon = cfg_.autoencoder ? recon_loss(tape, dec_, f.fused, f.finals) : nullptr;
    return total_loss(tape, task, recon, lambda);
}

void Model::set_param(const std::string& name, const Tensor& value) {
    for (auto& [n, node] : named_) {
        if (n != name) continue;
        if (!node->value.same_shape(value))
            throw ContractError("model: shape mismatch for parameter " + name + ": " +
                                node->value.shape_str() + " vs " + value.shape_str());
        node->value = value;
        return;
    }
    throw ContractError("model: unknown parameter " + name);
}

}  // namespace trifuse
