#include "trifuse/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace trifuse {

double f1_binary(const std::vector<double>& probs, const std::vector<int>& labels,
                 double threshold) {
    if (probs.empty()) throw ContractError("f1_binary: empty input");
    if (probs.size() != labels.size())
        throw ContractError("f1_binary: probs/labels length mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ContractError("f1_binary: labels must be 0/1");
        const bool pred = probs[i] >= threshold;
        if (pred && labels[i] == 1) ++tp;
        else if (pred) ++fp;
        else if (labels[i] == 1) ++fn;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double ccc(const std::vector<double>& pred, const std::vector<double>& target) {
    const std::size_t n = pred.size();
    if (n != target.size()) throw ContractError("ccc: length mismatch");
    if (n < 2) throw ContractError("ccc: need at least 2 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += pred[i];
        my += target[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pred[i] - mx;
        const double dy = target[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    const double gap = mx - my;
    return 2.0 * cov / (vx + vy + gap * gap + 1e-12);
}

FoldReport aggregate_folds(const std::vector<double>& scores, const std::string& metric) {
    if (scores.size() != 5) throw ContractError("aggregate_folds: expected 5 scores");
    FoldReport r;
    r.metric = metric;
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        r.folds[i] = scores[i];
        sum += scores[i];
    }
    r.mean = sum / 5.0;
    double ss = 0.0;
    for (double s : scores) ss += (s - r.mean) * (s - r.mean);
    r.stddev = std::sqrt(ss / 5.0);
    return r;
}

std::string FoldReport::table_row() const {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%-6s %7.4f %7.4f %7.4f %7.4f %7.4f | mean %.5f  std %.5f",
                  metric.c_str(), folds[0], folds[1], folds[2], folds[3], folds[4],
                  mean, stddev);
    return buf;
}

std::string FoldReport::json() const {
    nlohmann::json j;
    j["metric"] = metric;
    j["folds"] = folds;
    j["mean"] = mean;
    j["std"] = stddev;
    return j.dump();
}

}  // namespace trifuse
