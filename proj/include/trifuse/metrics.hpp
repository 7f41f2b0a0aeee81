#pragma once

#include <array>
#include <string>
#include <vector>

#include "trifuse/common.hpp"

namespace trifuse {

/// Binary F1 at a probability threshold: predict 1 iff prob >= threshold,
/// F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_binary(const std::vector<double>& probs, const std::vector<int>& labels,
                 double threshold = 0.5);

/// Concordance correlation, population moments:
///   2 cov(x,y) / (var x + var y + (mean x - mean y)^2 + 1e-12)
double ccc(const std::vector<double>& pred, const std::vector<double>& target);

struct FoldReport {
    std::string metric;
    std::array<double, 5> folds{};
    double mean = 0.0;
    double stddev = 0.0;  // population

    std::string table_row() const;  // aligned plain text
    std::string json() const;       // {"metric":..., "folds":[...], "mean":..., "std":...}
};

FoldReport aggregate_folds(const std::vector<double>& scores, const std::string& metric);

}  // namespace trifuse
