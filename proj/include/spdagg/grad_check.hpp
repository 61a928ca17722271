#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spdagg/network.hpp"

namespace spdagg {

struct BlockReport {
    std::string name;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<BlockReport> blocks;

    bool pass() const;
};

struct GradCheckOptions {
    std::size_t height = 3;
    std::size_t width = 3;
    double step = 1e-5;
    /// Applied to the analytic gradients before comparison (mutation testing).
    std::function<void(Gradients&)> tamper;
};

/// Small default instance: C0=6, C=5, C'=3, 3 classes (N=9 via the default 3x3 options).
PipelineConfig grad_check_default_config();

/// Compares backward() against central differences of forward() on a
/// random instance. The kernel bandwidth is frozen at its unperturbed
/// value, matching the constant-sigma backward. Error per entry is
/// |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const PipelineConfig& cfg, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options = {});

}  // namespace spdagg
