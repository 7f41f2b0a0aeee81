#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trifuse {

struct GradAuditEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradAuditReport {
    std::vector<GradAuditEntry> entries;
    double worst() const;
};

/// Central-difference audit of every differentiable building block: each
/// graph op, the GRU, attention and fusion, the head and losses, and the
/// whole pipeline on a 1-sample batch (classification and regression).
GradAuditReport run_grad_audit(std::uint64_t seed, double eps = 1e-5);

}  // namespace trifuse
