#include "srsan/gradcheck.hpp"

#include <cmath>

#include "srsan/batch.hpp"
#include "srsan/rng.hpp"

namespace srsan {

namespace {

Batch tiny_batch(std::size_t vocab_size, std::uint64_t seed) {
    // lengths 1, 3 and 5 cover the single-item edge and mixed padding
    const std::vector<std::size_t> lengths = {1, 3, 5};
    Batch b;
    b.rows = lengths.size();
    b.max_len = 5;
    b.lengths = lengths;
    b.indices.assign(b.rows * b.max_len, 0);
    Rng rng(seed);
    for (std::size_t r = 0; r < b.rows; ++r) {
        for (std::size_t j = 0; j < lengths[r]; ++j)
            b.indices[r * b.max_len + j] = static_cast<std::int32_t>(1 + rng.below(vocab_size));
        b.labels.push_back(static_cast<std::int32_t>(1 + rng.below(vocab_size)));
    }
    b.validate();
    return b;
}

double loss_at(const ModelConfig& config, const ModelParams<double>& params, const Batch& batch) {
    const auto cache = forward(config, params, batch);
    return batch_loss(predict_probs(cache.scores), batch.labels, config.loss_mode);
}

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(std::abs(analytic) + std::abs(fd), 1e-3);
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options, const GradMutator& mutate) {
    GradcheckReport report;
    for (const auto pm : {PredictionMode::kLastItem, PredictionMode::kSessionEmbedding}) {
        for (const auto lm : {LossMode::kCategoricalCe, LossMode::kLiteralBce}) {
            ModelConfig config;
            config.d = 8;
            config.heads = 2;
            config.layers = 1;
            config.ffn_mult = 2;
            config.vocab_size = 20;
            config.prediction_mode = pm;
            config.loss_mode = lm;
            config.seed = options.seed;

            ModelParams<double> params = init_params<double>(config);
            const Batch batch = tiny_batch(config.vocab_size, options.seed + 1);

            const auto cache = forward(config, params, batch);
            ModelParams<double> analytic = backward(config, params, cache, batch.labels);
            if (mutate) mutate(analytic);

            GradcheckRun run;
            run.prediction_mode = pm;
            run.loss_mode = lm;

            auto ptensors = params.tensor_list();
            auto gtensors = analytic.tensor_list();
            for (std::size_t ti = 0; ti < ptensors.size(); ++ti) {
                Matrix<double>& theta = *ptensors[ti].second;
                const Matrix<double>& grad = *gtensors[ti].second;
                TensorCheck check;
                check.tensor = ptensors[ti].first;
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    const double saved = theta.data()[i];
                    theta.data()[i] = saved + options.epsilon;
                    const double up = loss_at(config, params, batch);
                    theta.data()[i] = saved - options.epsilon;
                    const double down = loss_at(config, params, batch);
                    theta.data()[i] = saved;
                    const double fd = (up - down) / (2.0 * options.epsilon);
                    check.max_rel_err = std::max(check.max_rel_err, rel_err(grad.data()[i], fd));
                }
                check.passed = check.max_rel_err <= options.tolerance;
                run.passed = run.passed && check.passed;
                run.tensors.push_back(std::move(check));
            }
            report.passed = report.passed && run.passed;
            report.runs.push_back(std::move(run));
        }
    }
    return report;
}

}  // namespace srsan
