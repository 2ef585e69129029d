#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "srsan/data.hpp"
#include "srsan/metrics.hpp"
#include "srsan/model.hpp"

namespace srsan {

struct TrainConfig {
    double lr0 = 1e-3;
    double decay_factor = 0.1;
    std::size_t decay_every = 3;  // epochs
    std::size_t batch_size = 100;
    double l2 = 1e-5;
    std::size_t epochs = 12;
    LossMode loss_mode = LossMode::kCategoricalCe;
    std::uint64_t seed = 42;
    std::size_t metric_k = 20;

    void validate() const;  // throws UsageError
};

/// Adam accumulators; shapes mirror ModelParams.
template <typename T>
struct AdamState {
    ModelParams<T> m;
    ModelParams<T> v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zeros(const ModelParams<T>& params);
};

/// Coupled L2: adds l2 * theta to every trainable gradient entry before the
/// Adam moments; the padding embedding row is exempt.
template <typename T>
void l2_penalty(const ModelParams<T>& params, ModelParams<T>& grads, double l2);

/// Standard Adam with bias correction.
template <typename T>
void adam_step(AdamState<T>& state, ModelParams<T>& params, const ModelParams<T>& grads, double lr);

/// lr0 * decay_factor^floor(epoch / decay_every).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double hr = 0.0;   // on the eval set, when present
    double mrr = 0.0;
    bool evaluated = false;
    double seconds = 0.0;
};

template <typename T>
struct FitResult {
    ModelParams<T> params;  // from the best-MRR epoch (earliest on ties)
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

using ProgressSink = std::function<void(const EpochLog&)>;

/// Full training loop: per epoch, shuffled batches of
/// forward -> loss -> backward -> l2 -> adam, then an evaluation pass over
/// eval_instances (when non-empty). Throws NumericError with a batch dump if
/// the loss goes non-finite. With no eval set the final epoch's params are
/// returned.
template <typename T>
FitResult<T> fit(const ModelConfig& model_config, const std::vector<Instance>& train_instances,
                 const std::vector<Instance>& eval_instances, const TrainConfig& train_config,
                 const ProgressSink& sink = {});

}  // namespace srsan
