#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srsan/model.hpp"

namespace srsan {

struct GradcheckOptions {
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    std::uint64_t seed = 7;
};

struct TensorCheck {
    std::string tensor;
    double max_rel_err = 0.0;
    bool passed = true;
};

struct GradcheckRun {
    PredictionMode prediction_mode;
    LossMode loss_mode;
    std::vector<TensorCheck> tensors;
    bool passed = true;
};

struct GradcheckReport {
    std::vector<GradcheckRun> runs;
    bool passed = true;
};

/// Test hook: mutates the analytic gradients before comparison.
using GradMutator = std::function<void(ModelParams<double>&)>;

/// Builds a tiny 64-bit model (d=8, h=2, 1 layer, ffn_mult=2, |V|=20, batch
/// of 3 sessions) and compares every analytic gradient entry against central
/// finite differences of the batch loss, for both prediction modes and both
/// loss modes. Relative error uses |a - f| / max(|a| + |f|, 1e-3).
GradcheckReport run_gradcheck(const GradcheckOptions& options = {}, const GradMutator& mutate = {});

}  // namespace srsan
