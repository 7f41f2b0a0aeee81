#include "trifuse/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "trifuse/model.hpp"

namespace trifuse {

using ad::Node;
using ad::Tape;

namespace {

// Values away from 0 so relu's kink and the log clamp never sit inside the
// finite-difference stencil.
Tensor signed_values(std::vector<std::size_t> shape, Rng& rng) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) {
        const double mag = 0.1 + 1.4 * rng.uniform();
        x = rng.uniform() < 0.5 ? -mag : mag;
    }
    return Tensor(std::move(shape), std::move(v));
}

Tensor positive_values(std::vector<std::size_t> shape, Rng& rng) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> v(n);
    for (double& x : v) x = 0.2 + 1.8 * rng.uniform();
    return Tensor(std::move(shape), std::move(v));
}

class Audit {
public:
    Audit(std::uint64_t seed, double eps) : rng_(derive_seed(seed, 0x6AD)), eps_(eps) {}

    // Weighted scalar readout: sum(w * x) with a random w so ops whose plain
    // sum has zero gradient (softmax rows) still get exercised. w is derived
    // from the current check's name, not drawn from rng_: grad_check rebuilds
    // the graph many times and every rebuild must see the same weights.
    Node* readout(Tape& t, Node* x) {
        Rng wrng(readout_seed_);
        Tensor w = signed_values(x->value.shape(), wrng);
        return ad::sum_all(t, ad::mul(t, x, t.leaf(std::move(w))));
    }

    void check(const std::string& name, std::span<Node* const> params,
               const std::function<Node*(Tape&)>& build) {
        readout_seed_ = derive_seed(0xC0FFEE, std::hash<std::string>{}(name));
        report_.entries.push_back({name, ad::grad_check(build, params, eps_)});
    }

    GradAuditReport take() { return std::move(report_); }

    Rng rng_;
    double eps_;
    std::uint64_t readout_seed_ = 0;
    GradAuditReport report_;
};

void audit_ops(Audit& a) {
    Tape p;
    Node* x = p.leaf(signed_values({3, 4}, a.rng_));
    Node* y = p.leaf(signed_values({3, 4}, a.rng_));
    Node* pos = p.leaf(positive_values({3, 4}, a.rng_));
    const std::vector<Node*> xy = {x, y};
    const std::vector<Node*> just_x = {x};
    const std::vector<Node*> just_pos = {pos};

    a.check("op.add", xy, [&](Tape& t) { return a.readout(t, ad::add(t, x, y)); });
    a.check("op.mul", xy, [&](Tape& t) { return a.readout(t, ad::mul(t, x, y)); });
    a.check("op.scale", just_x,
            [&](Tape& t) { return a.readout(t, ad::scale(t, x, -1.7)); });
    a.check("op.sigmoid", just_x,
            [&](Tape& t) { return a.readout(t, ad::sigmoid(t, x)); });
    a.check("op.tanh", just_x, [&](Tape& t) { return a.readout(t, ad::tanh(t, x)); });
    a.check("op.relu", just_x, [&](Tape& t) { return a.readout(t, ad::relu(t, x)); });
    a.check("op.log_clamped", just_pos,
            [&](Tape& t) { return a.readout(t, ad::log_clamped(t, pos)); });
    a.check("op.pow_const(1.7)", just_pos,
            [&](Tape& t) { return a.readout(t, ad::pow_const(t, pos, 1.7)); });
    a.check("op.pow_const(2)", just_pos,
            [&](Tape& t) { return a.readout(t, ad::pow_const(t, pos, 2.0)); });
    a.check("op.pow_const(0.5)", just_pos,
            [&](Tape& t) { return a.readout(t, ad::pow_const(t, pos, 0.5)); });

    Node* ma = p.leaf(signed_values({3, 4}, a.rng_));
    Node* mb = p.leaf(signed_values({4, 2}, a.rng_));
    const std::vector<Node*> mab = {ma, mb};
    a.check("op.matmul", mab, [&](Tape& t) { return a.readout(t, ad::matmul(t, ma, mb)); });
    a.check("op.transpose", std::vector<Node*>{ma},
            [&](Tape& t) { return a.readout(t, ad::transpose(t, ma)); });
    a.check("op.softmax_rows", just_x,
            [&](Tape& t) { return a.readout(t, ad::softmax_rows(t, x)); });

    Node* ca = p.leaf(signed_values({2, 3}, a.rng_));
    Node* cb = p.leaf(signed_values({1, 3}, a.rng_));
    Node* cc = p.leaf(signed_values({2, 2}, a.rng_));
    a.check("op.concat_rows", std::vector<Node*>{ca, cb},
            [&](Tape& t) { return a.readout(t, ad::concat_rows(t, {ca, cb})); });
    a.check("op.concat_cols", std::vector<Node*>{ca, cc},
            [&](Tape& t) { return a.readout(t, ad::concat_cols(t, {ca, cc})); });
    a.check("op.select_row", just_x,
            [&](Tape& t) { return a.readout(t, ad::select_row(t, x, 1)); });
    Node* row = p.leaf(signed_values({1, 5}, a.rng_));
    a.check("op.repeat_rows", std::vector<Node*>{row},
            [&](Tape& t) { return a.readout(t, ad::repeat_rows(t, row, 4)); });
    a.check("op.sum_all", just_x,
            [&](Tape& t) { return ad::scale(t, ad::sum_all(t, x), 1.3); });
}

void audit_gru(Audit& a) {
    Tape p;
    Rng init(derive_seed(7, 0x6B0));
    GruParams g = GruParams::init(p, 3, 4, init);
    std::vector<Node*> params = {g.wr, g.wz, g.wh, g.ur, g.uz, g.uh, g.br, g.bz, g.bh};
    std::vector<Node*> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(p.leaf(signed_values({2, 3}, a.rng_)));
    params.insert(params.end(), xs.begin(), xs.end());
    a.check("gru_forward", params, [&](Tape& t) {
        return a.readout(t, gru_forward(t, g, xs).back());
    });
}

void audit_fusion(Audit& a) {
    Tape p;
    Rng init(derive_seed(7, 0x6B1));
    AttentionParams attn = AttentionParams::init(p, 4, init);
    Node* q = p.leaf(signed_values({1, 4}, a.rng_));
    Node* kv = p.leaf(signed_values({3, 4}, a.rng_));
    a.check("cross_attention", std::vector<Node*>{attn.wq, attn.wk, attn.wv, q, kv},
            [&](Tape& t) { return a.readout(t, attend(t, attn, q, kv).context); });

    FusionParams fp = FusionParams::init(p, 4, init);
    Node* img = p.leaf(signed_values({2, 4}, a.rng_));
    std::vector<Node*> vhs, ths;
    for (int i = 0; i < 3; ++i) vhs.push_back(p.leaf(signed_values({2, 4}, a.rng_)));
    for (int i = 0; i < 2; ++i) ths.push_back(p.leaf(signed_values({2, 4}, a.rng_)));
    std::vector<Node*> params = {fp.iv.wq, fp.iv.wk, fp.iv.wv,
                                 fp.it.wq, fp.it.wk, fp.it.wv, img};
    params.insert(params.end(), vhs.begin(), vhs.end());
    params.insert(params.end(), ths.begin(), ths.end());
    a.check("fuse", params, [&](Tape& t) {
        return a.readout(t, fuse(t, fp, img, vhs, ths, KvMode::Sequence));
    });
}

void audit_heads(Audit& a) {
    Tape p;
    Rng init(derive_seed(7, 0x6B2));
    HeadParams cls = HeadParams::init(p, 8, 4, 1, init);
    Node* fused = p.leaf(signed_values({2, 8}, a.rng_));
    const std::vector<Node*> cls_params = {cls.w1, cls.b1, cls.w2, cls.b2, fused};
    a.check("head+focal", cls_params, [&](Tape& t) {
        return focal_loss(t, head_forward(t, cls, fused), {1, 0});
    });

    HeadParams reg = HeadParams::init(p, 8, 4, 2, init);
    Node* tgt = p.leaf(signed_values({2, 2}, a.rng_));
    a.check("head+mse", std::vector<Node*>{reg.w1, reg.b1, reg.w2, reg.b2, fused},
            [&](Tape& t) { return mse_loss(t, head_forward(t, reg, fused), tgt); });

    DecoderParams dec = DecoderParams::init(p, 8, 12, init);
    Node* fused2 = p.leaf(signed_values({2, 8}, a.rng_));
    Node* finals = p.leaf(signed_values({2, 12}, a.rng_));
    a.check("recon_loss", std::vector<Node*>{dec.wd, dec.bd, fused2, finals},
            [&](Tape& t) { return recon_loss(t, dec, fused2, finals); });

    a.check("total_loss", cls_params, [&](Tape& t) {
        Node* task = focal_loss(t, head_forward(t, cls, fused), {1, 0});
        Node* recon = recon_loss(t, dec, fused2, finals);
        return total_loss(t, task, recon, 0.3);
    });
}

WindowSample random_window(Task task, std::size_t d, Rng& rng) {
    auto stream = [&](Modality m, std::uint32_t steps) {
        std::vector<float> v(steps * d);
        for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        return FeatureSequence::make(m, steps, static_cast<std::uint32_t>(d), std::move(v));
    };
    WindowSample s;
    s.video = stream(Modality::Video, kVideoSamplesPerWindow);
    s.image = stream(Modality::Image, kImageSamplesPerWindow);
    s.text = stream(Modality::Text, kTextSamplesPerWindow);
    s.label = task == Task::Classification ? Label::classification(1)
                                           : Label::regression(0.4, -0.3);
    s.clip_id = "gradcheck";
    return s;
}

void audit_pipeline(Audit& a, Task task) {
    ModelConfig mc;
    mc.task = task;
    mc.d_v = mc.d_i = mc.d_t = 6;
    mc.d_h = 4;
    mc.autoencoder = true;
    Model model(mc, 99);
    WindowSample s = random_window(task, 6, a.rng_);
    const std::vector<const WindowSample*> batch = {&s};
    a.check(task == Task::Classification ? "pipeline.classification" : "pipeline.regression",
            model.params(),
            [&](Tape& t) { return model.loss(t, batch, 0.1); });
}

}  // namespace

double GradAuditReport::worst() const {
    double w = 0.0;
    for (const GradAuditEntry& e : entries) w = std::max(w, e.max_rel_err);
    return w;
}

GradAuditReport run_grad_audit(std::uint64_t seed, double eps) {
    Audit a(seed, eps);
    audit_ops(a);
    audit_gru(a);
    audit_fusion(a);
    audit_heads(a);
    audit_pipeline(a, Task::Classification);
    audit_pipeline(a, Task::Regression);
    return a.take();
}

}  // namespace trifuse
