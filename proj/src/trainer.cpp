#include "trifuse/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "trifuse/metrics.hpp"

namespace trifuse {

using nlohmann::json;

// ---- AdamW -----------------------------------------------------------------

AdamW::AdamW(Config cfg) : cfg_(cfg) {
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr))
        throw ContractError("adamw: lr must be finite and >= 0");
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
        throw ContractError("adamw: betas must lie in [0,1)");
    if (cfg.eps <= 0.0) throw ContractError("adamw: eps must be > 0");
    if (cfg.weight_decay < 0.0) throw ContractError("adamw: weight decay must be >= 0");
}

void AdamW::step(std::span<ad::Node* const> params) {
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (ad::Node* p : params) {
            m_.push_back(Tensor::zeros(p->value.shape()));
            v_.push_back(Tensor::zeros(p->value.shape()));
        }
    } else if (m_.size() != params.size()) {
        throw ContractError("adamw: parameter set changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = params[i]->value;
        if (!m_[i].same_shape(theta))
            throw ContractError("adamw: parameter shape changed between steps");
        const Tensor& g = params[i]->grad();
        for (std::size_t k = 0; k < theta.numel(); ++k) {
            const double gk = g[k];
            m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * gk;
            v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * gk * gk;
            const double m_hat = m_[i][k] / bc1;
            const double v_hat = v_[i][k] / bc2;
            theta[k] -= cfg_.lr *
                        (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * theta[k]);
        }
    }
}

// ---- TrainConfig -----------------------------------------------------------

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("config: lr must be >= 0");
    if (batch < 1) throw ConfigError("config: batch must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("config: betas must lie in [0,1)");
    if (eps <= 0.0) throw ConfigError("config: eps must be > 0");
    if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
    if (patience < 1) throw ConfigError("config: patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("config: max_epochs must be >= 1");
    if (sigma < 0.0) throw ConfigError("config: sigma must be >= 0");
    if (mask_p < 0.0 || mask_p > 1.0) throw ConfigError("config: mask_p must lie in [0,1]");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    if (d_h < 1) throw ConfigError("config: d_h must be >= 1");
    if (val_fold < 1 || val_fold > 5) throw ConfigError("config: val_fold must lie in 1..5");
}

json TrainConfig::to_json() const {
    json j;
    j["task"] = task_name(task);
    j["lr"] = lr;
    j["batch"] = batch;
    j["betas"] = {beta1, beta2};
    j["eps"] = eps;
    j["weight_decay"] = weight_decay;
    j["patience"] = patience;
    j["max_epochs"] = max_epochs;
    j["seed"] = seed;
    j["sigma"] = sigma;
    j["mask_p"] = mask_p;
    j["autoencoder"] = autoencoder;
    j["lambda"] = lambda;
    j["d_h"] = d_h;
    j["attention"] = {{"kv", kv_mode_name(kv)}};
    j["fusion"] = fusion_mode_name(fusion);
    j["use_video"] = use_video;
    j["use_image"] = use_image;
    j["use_text"] = use_text;
    j["val_fold"] = val_fold;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    TrainConfig c;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "task") c.task = task_from_name(val.get<std::string>());
            else if (key == "lr") c.lr = val.get<double>();
            else if (key == "batch") c.batch = val.get<std::size_t>();
            else if (key == "betas") {
                if (!val.is_array() || val.size() != 2)
                    throw ConfigError("config: betas must be [beta1, beta2]");
                c.beta1 = val[0].get<double>();
                c.beta2 = val[1].get<double>();
            } else if (key == "eps") c.eps = val.get<double>();
            else if (key == "weight_decay") c.weight_decay = val.get<double>();
            else if (key == "patience") c.patience = val.get<std::size_t>();
            else if (key == "max_epochs") c.max_epochs = val.get<std::size_t>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "sigma") c.sigma = val.get<double>();
            else if (key == "mask_p") c.mask_p = val.get<double>();
            else if (key == "autoencoder") c.autoencoder = val.get<bool>();
            else if (key == "lambda") c.lambda = val.get<double>();
            else if (key == "d_h") c.d_h = val.get<std::size_t>();
            else if (key == "attention") {
                if (!val.is_object() || !val.contains("kv") || val.size() != 1)
                    throw ConfigError("config: attention must be {\"kv\": ...}");
                c.kv = kv_mode_from_name(val["kv"].get<std::string>());
            } else if (key == "fusion") c.fusion = fusion_mode_from_name(val.get<std::string>());
            else if (key == "use_video") c.use_video = val.get<bool>();
            else if (key == "use_image") c.use_image = val.get<bool>();
            else if (key == "use_text") c.use_text = val.get<bool>();
            else if (key == "val_fold") c.val_fold = val.get<int>();
            else throw ConfigError("config: unknown key \"" + key + "\"");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

ModelConfig TrainConfig::model_config(std::size_t dv, std::size_t di, std::size_t dt) const {
    ModelConfig mc;
    mc.task = task;
    mc.d_v = dv;
    mc.d_i = di;
    mc.d_t = dt;
    mc.d_h = d_h;
    mc.kv = kv;
    mc.fusion = fusion;
    mc.use_video = use_video;
    mc.use_image = use_image;
    mc.use_text = use_text;
    mc.autoencoder = autoencoder;
    return mc;
}

// ---- Checkpoint ------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'T', 'F', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

std::uint32_t take_u32(std::istream& in, std::size_t offset, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(std::string("checkpoint: truncated ") + what, offset);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t take_u64(std::istream& in, std::size_t offset, const char* what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw ParseError(std::string("checkpoint: truncated ") + what, offset);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

constexpr std::size_t kCkptHeaderBytes = 4 + 4 + 8;

}  // namespace

Model Checkpoint::build_model() const {
    Model m(config.model_config(d_v, d_i, d_t), config.seed);
    if (m.named_params().size() != tensors.size())
        throw DataError("checkpoint: expected " + std::to_string(m.named_params().size()) +
                        " tensors, found " + std::to_string(tensors.size()));
    for (const auto& [name, value] : tensors) m.set_param(name, value);
    return m;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    json cfg = c.config.to_json();
    cfg["d_v"] = c.d_v;
    cfg["d_i"] = c.d_i;
    cfg["d_t"] = c.d_t;

    // Offsets are relative to the end of the index so the index length does
    // not feed back into its own contents.
    json tensors = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : c.tensors) {
        tensors[name] = offset;
        offset += kFeatureHeaderBytes + 8 * t.numel();
    }
    const json index = {{"best", c.best}, {"config", cfg}, {"epoch", c.epoch},
                        {"tensors", tensors}};
    const std::string index_bytes = index.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kCkptMagic, 4);
    put_u32(out, kCkptVersion);
    put_u64(out, index_bytes.size());
    out.write(index_bytes.data(), static_cast<std::streamsize>(index_bytes.size()));
    for (const auto& [name, t] : c.tensors) {
        std::vector<double> vals(t.data(), t.data() + t.numel());
        write_f64_block(out, vals, static_cast<std::uint32_t>(t.rows()),
                        static_cast<std::uint32_t>(t.cols()));
    }
    if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw ParseError("checkpoint: bad magic", 0);
    const std::uint32_t version = take_u32(in, 4, "version");
    if (version != kCkptVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
    const std::uint64_t index_len = take_u64(in, 8, "index length");

    std::string index_bytes(index_len, '\0');
    if (!in.read(index_bytes.data(), static_cast<std::streamsize>(index_len)))
        throw ParseError("checkpoint: truncated index", kCkptHeaderBytes);
    json index;
    try {
        index = json::parse(index_bytes);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: index: ") + e.what(), kCkptHeaderBytes);
    }

    Checkpoint c;
    try {
        json cfg = index.at("config");
        c.d_v = cfg.at("d_v").get<std::size_t>();
        c.d_i = cfg.at("d_i").get<std::size_t>();
        c.d_t = cfg.at("d_t").get<std::size_t>();
        cfg.erase("d_v");
        cfg.erase("d_i");
        cfg.erase("d_t");
        c.config = TrainConfig::from_json(cfg);
        c.epoch = index.at("epoch").get<std::size_t>();
        c.best = index.at("best").get<double>();
        const std::size_t blocks_start = kCkptHeaderBytes + index_len;
        for (const auto& [name, off] : index.at("tensors").items()) {
            in.clear();
            in.seekg(static_cast<std::streamoff>(blocks_start + off.get<std::uint64_t>()));
            std::uint32_t rows = 0, cols = 0;
            std::vector<double> vals;
            try {
                vals = read_f64_block(in, rows, cols);
            } catch (const ParseError& e) {
                throw ParseError("checkpoint: tensor " + name + ": " + e.what(), e.offset);
            }
            c.tensors.emplace_back(name, Tensor({rows, cols}, std::move(vals)));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: index: ") + e.what(), kCkptHeaderBytes);
    }
    return c;
}

// ---- evaluation ------------------------------------------------------------

namespace {

constexpr std::size_t kEvalBatch = 64;

}  // namespace

json EvalReport::to_json() const {
    json j;
    j["metric"] = metric;
    j["score"] = score;
    j["n_windows"] = n_windows;
    return j;
}

EvalReport evaluate(Model& model, const std::vector<WindowSample>& split) {
    if (split.empty()) throw ConfigError("evaluate: empty split");
    const Task task = model.config().task;
    for (const WindowSample& s : split)
        if (s.label.task != task)
            throw ConfigError("evaluate: label task does not match the model");

    std::vector<double> probs, pv, pa, tv, ta;
    std::vector<int> labels;
    for (std::size_t beg = 0; beg < split.size(); beg += kEvalBatch) {
        const std::size_t end = std::min(beg + kEvalBatch, split.size());
        std::vector<const WindowSample*> batch;
        batch.reserve(end - beg);
        for (std::size_t i = beg; i < end; ++i) batch.push_back(&split[i]);
        ad::Tape tape;
        Model::Forward f = model.forward(tape, batch);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (task == Task::Classification) {
                const double logit = f.out->value.at(i, 0);
                probs.push_back(1.0 / (1.0 + std::exp(-logit)));
                labels.push_back(batch[i]->label.cls);
            } else {
                pv.push_back(f.out->value.at(i, 0));
                pa.push_back(f.out->value.at(i, 1));
                tv.push_back(batch[i]->label.valence);
                ta.push_back(batch[i]->label.arousal);
            }
        }
    }

    EvalReport rep;
    rep.n_windows = split.size();
    if (task == Task::Classification) {
        rep.metric = "f1";
        rep.score = f1_binary(probs, labels);
    } else {
        rep.metric = "ccc";
        rep.score = 0.5 * (ccc(pv, tv) + ccc(pa, ta));
    }
    return rep;
}

EvalReport evaluate(const Checkpoint& ckpt, const Manifest& manifest, int fold) {
    if (manifest.task() != ckpt.config.task)
        throw ConfigError("evaluate: manifest task does not match the checkpoint");
    Model model = ckpt.build_model();
    const std::vector<WindowSample> split = load_windows(manifest, fold, true);
    if (split.empty()) throw ConfigError("evaluate: fold " + std::to_string(fold) + " is empty");
    return evaluate(model, split);
}

// ---- training loop ---------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  std::ostream* epoch_log) {
    cfg.validate();
    if (manifest.task() != cfg.task)
        throw ConfigError("train: manifest task does not match the config");
    std::vector<WindowSample> tr = load_windows(manifest, cfg.val_fold, false);
    std::vector<WindowSample> va = load_windows(manifest, cfg.val_fold, true);
    if (tr.empty()) throw ConfigError("train: training split is empty");
    if (va.empty()) throw ConfigError("train: validation split is empty");

    const WindowSample& w0 = tr.front();
    Model model(cfg.model_config(w0.video.dim, w0.image.dim, w0.text.dim), cfg.seed);
    AdamW opt({cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});

    TrainResult res;
    res.metric = cfg.task == Task::Classification ? "f1" : "ccc";
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t bad = 0;
    std::vector<std::pair<std::string, Tensor>> best_tensors;
    const bool augmenting = cfg.sigma > 0.0 || cfg.mask_p > 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0xE90C0000ULL + epoch));
        std::vector<std::size_t> order(tr.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng.below(i + 1)]);

        double loss_sum = 0.0;
        try {
            for (std::size_t beg = 0; beg < order.size(); beg += cfg.batch) {
                const std::size_t end = std::min(beg + cfg.batch, order.size());
                std::vector<WindowSample> held;
                std::vector<const WindowSample*> batch;
                batch.reserve(end - beg);
                if (augmenting) {
                    held.reserve(end - beg);
                    for (std::size_t i = beg; i < end; ++i) {
                        WindowSample s = tr[order[i]];
                        s.video = augment(s.video, cfg.sigma, cfg.mask_p, rng);
                        s.image = augment(s.image, cfg.sigma, cfg.mask_p, rng);
                        s.text = augment(s.text, cfg.sigma, cfg.mask_p, rng);
                        held.push_back(std::move(s));
                    }
                    for (const WindowSample& s : held) batch.push_back(&s);
                } else {
                    for (std::size_t i = beg; i < end; ++i) batch.push_back(&tr[order[i]]);
                }
                ad::Tape tape;
                ad::Node* loss = model.loss(tape, batch, cfg.lambda);
                loss_sum += loss->value[0] * static_cast<double>(end - beg);
                ad::backward(loss);
                opt.step(model.params());
                ad::zero_grads(model.params());
            }
        } catch (const DataError& e) {
            std::cerr << "training diverged at epoch " << epoch << ": " << e.what() << "\n";
            if (epoch_log) {
                json line = {{"event", "diverged"}, {"epoch", epoch}};
                *epoch_log << line.dump() << '\n';
            }
            throw;
        }

        const double train_loss = loss_sum / static_cast<double>(tr.size());
        const EvalReport rep = evaluate(model, va);
        res.log.push_back({epoch, train_loss, rep.score});
        if (epoch_log) {
            json line;
            line["epoch"] = epoch;
            line["train_loss"] = train_loss;
            line["val_" + res.metric] = rep.score;
            *epoch_log << line.dump() << '\n';
        }

        if (rep.score > best) {
            best = rep.score;
            best_epoch = epoch;
            bad = 0;
            best_tensors.clear();
            for (const auto& [name, node] : model.named_params())
                best_tensors.emplace_back(name, node->value);
        } else if (++bad >= cfg.patience) {
            break;
        }
    }

    res.checkpoint.config = cfg;
    res.checkpoint.d_v = w0.video.dim;
    res.checkpoint.d_i = w0.image.dim;
    res.checkpoint.d_t = w0.text.dim;
    res.checkpoint.epoch = best_epoch;
    res.checkpoint.best = best;
    res.checkpoint.tensors = std::move(best_tensors);
    return res;
}

}  // namespace trifuse
