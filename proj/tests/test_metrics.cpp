#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "trifuse/common.hpp"
#include "trifuse/metrics.hpp"

using namespace trifuse;
using nlohmann::json;

TEST_CASE("binary F1 on counted confusion cases") {
    // Perfect separation.
    CHECK(f1_binary({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 1.0);

    // 45 true positives, 5 false positives, 5 false negatives:
    // F1 = 90 / (90 + 5 + 5) = 0.9.
    std::vector<double> probs;
    std::vector<int> labels;
    for (int i = 0; i < 45; ++i) probs.push_back(0.9), labels.push_back(1);
    for (int i = 0; i < 5; ++i) probs.push_back(0.9), labels.push_back(0);
    for (int i = 0; i < 5; ++i) probs.push_back(0.1), labels.push_back(1);
    for (int i = 0; i < 45; ++i) probs.push_back(0.1), labels.push_back(0);
    CHECK(f1_binary(probs, labels) == doctest::Approx(0.9).epsilon(1e-12));

    // No predicted positives and no true positives: defined as 0.
    CHECK(f1_binary({0.1, 0.2}, {0, 1}) == 0.0);
    CHECK(f1_binary({0.1, 0.2}, {0, 0}) == 0.0);

    // Threshold ties predict positive.
    CHECK(f1_binary({0.5}, {1}) == 1.0);
    CHECK(f1_binary({0.5}, {0}, 0.5) == 0.0);

    // 2 TP, 1 FP, 1 FN -> 4/6; mixed case frozen from hand counting.
    CHECK(f1_binary({0.9, 0.8, 0.4, 0.7, 0.2, 0.6}, {1, 1, 0, 1, 0, 0}) ==
          doctest::Approx(6.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("binary F1 is permutation invariant and validates input") {
    const std::vector<double> probs = {0.9, 0.8, 0.4, 0.7, 0.2, 0.6};
    const std::vector<int> labels = {1, 1, 0, 1, 0, 0};
    const double base = f1_binary(probs, labels);
    const std::vector<std::size_t> perm = {3, 5, 0, 2, 4, 1};
    std::vector<double> p2(6);
    std::vector<int> l2(6);
    for (std::size_t i = 0; i < 6; ++i) {
        p2[i] = probs[perm[i]];
        l2[i] = labels[perm[i]];
    }
    CHECK(f1_binary(p2, l2) == base);

    CHECK_THROWS_AS(f1_binary({}, {}), ContractError);
    CHECK_THROWS_AS(f1_binary({0.5}, {1, 0}), ContractError);
    CHECK_THROWS_AS(f1_binary({0.5}, {2}), ContractError);
    CHECK_THROWS_AS(f1_binary({0.5}, {-1}), ContractError);
}

TEST_CASE("concordance correlation on closed-form cases") {
    CHECK(ccc({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ccc({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == doctest::Approx(-1.0).epsilon(1e-9));
    // Equal variances, unit shift: 2*v / (2*v + 1) with v = 2/3.
    CHECK(ccc({1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}) == doctest::Approx(4.0 / 7.0).epsilon(1e-9));

    // A constant shift can only hurt.
    const std::vector<double> x = {0.3, -0.1, 0.7, 0.2, -0.5};
    std::vector<double> shifted = x;
    for (double& v : shifted) v += 0.4;
    CHECK(ccc(x, shifted) < 1.0);
    CHECK(ccc(x, shifted) > 0.0);

    // Always within [-1, 1] up to the denominator's epsilon.
    Rng rng(81);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(16), b(16);
        for (std::size_t i = 0; i < 16; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        const double c = ccc(a, b);
        CHECK(c >= -1.0 - 1e-9);
        CHECK(c <= 1.0 + 1e-9);
    }

    // Reordering both sequences together changes nothing beyond roundoff.
    std::vector<double> a = {0.1, 0.5, -0.2, 0.9, 0.4};
    std::vector<double> b = {0.2, 0.4, -0.1, 0.8, 0.3};
    const double base = ccc(a, b);
    const std::vector<std::size_t> perm = {2, 0, 4, 1, 3};
    std::vector<double> ap(5), bp(5);
    for (std::size_t i = 0; i < 5; ++i) {
        ap[i] = a[perm[i]];
        bp[i] = b[perm[i]];
    }
    CHECK(ccc(ap, bp) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS(ccc({1.0}, {1.0}), ContractError);
    CHECK_THROWS_AS(ccc({1.0, 2.0}, {1.0}), ContractError);
}

TEST_CASE("fold aggregation reproduces the reference report line") {
    const FoldReport f1 = aggregate_folds({0.9450, 0.9442, 0.9404, 0.9380, 0.9400}, "f1");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", f1.mean);
    CHECK(std::string(buf) == "0.94152");
    CHECK(std::abs(f1.mean - 0.94152) < 1e-12);
    std::snprintf(buf, sizeof buf, "%.5f", f1.stddev);
    CHECK(std::string(buf) == "0.00266");

    const FoldReport ccc_rep = aggregate_folds({0.8930, 0.8922, 0.8871, 0.8862, 0.8917}, "ccc");
    std::snprintf(buf, sizeof buf, "%.5f", ccc_rep.mean);
    CHECK(std::string(buf) == "0.89004");
    CHECK(std::abs(ccc_rep.mean - 0.89004) < 1e-12);
    std::snprintf(buf, sizeof buf, "%.5f", ccc_rep.stddev);
    CHECK(std::string(buf) == "0.00281");

    const std::string row = f1.table_row();
    CHECK(row.find("f1") != std::string::npos);
    CHECK(row.find("0.9450") != std::string::npos);
    CHECK(row.find("0.9380") != std::string::npos);
    CHECK(row.find("mean 0.94152") != std::string::npos);
    CHECK(row.find("std 0.00266") != std::string::npos);

    const json j = json::parse(f1.json());
    CHECK(j.at("metric").get<std::string>() == "f1");
    CHECK(j.at("folds").size() == 5);
    CHECK(j.at("folds")[0].get<double>() == 0.9450);
    CHECK(j.at("mean").get<double>() == f1.mean);
    CHECK(j.at("std").get<double>() == f1.stddev);

    const FoldReport flat = aggregate_folds({0.5, 0.5, 0.5, 0.5, 0.5}, "f1");
    CHECK(flat.mean == 0.5);
    CHECK(flat.stddev == 0.0);

    CHECK_THROWS_AS(aggregate_folds({0.5, 0.5}, "f1"), ContractError);
    CHECK_THROWS_AS(aggregate_folds({}, "f1"), ContractError);
}
