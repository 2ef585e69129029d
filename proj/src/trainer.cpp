#include "srsan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace srsan {

void TrainConfig::validate() const {
    if (!(lr0 > 0)) throw UsageError("train config: lr must be > 0");
    if (!(decay_factor > 0) || decay_factor > 1) throw UsageError("train config: decay factor must be in (0, 1]");
    if (decay_every < 1) throw UsageError("train config: decay interval must be >= 1 epoch");
    if (batch_size < 1) throw UsageError("train config: batch size must be >= 1");
    if (l2 < 0) throw UsageError("train config: l2 must be >= 0");
    if (metric_k < 1) throw UsageError("train config: metric cutoff must be >= 1");
}

template <typename T>
AdamState<T> AdamState<T>::zeros(const ModelParams<T>& params) {
    AdamState<T> s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    return s;
}

template <typename T>
void l2_penalty(const ModelParams<T>& params, ModelParams<T>& grads, double l2) {
    if (l2 == 0.0) return;
    const auto ps = params.tensor_list();
    const auto gs = grads.tensor_list();
    if (ps.size() != gs.size()) throw ContractViolation("l2_penalty: tensor lists differ");
    const T c = static_cast<T>(l2);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Matrix<T>& p = *ps[i].second;
        Matrix<T>& g = *gs[i].second;
        if (!p.same_shape(g)) throw ContractViolation("l2_penalty: shape mismatch on " + ps[i].first);
        // the padding embedding row stays frozen
        const std::size_t skip = ps[i].first == "embed" ? p.cols() : 0;
        const T* pd = p.data();
        T* gd = g.data();
        for (std::size_t j = skip; j < p.size(); ++j) gd[j] += c * pd[j];
    }
}

template <typename T>
void adam_step(AdamState<T>& state, ModelParams<T>& params, const ModelParams<T>& grads, double lr) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    const T one_m_b1 = static_cast<T>(1.0 - state.beta1);
    const T one_m_b2 = static_cast<T>(1.0 - state.beta2);
    const T step = static_cast<T>(lr / bc1);
    const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(state.eps);

    auto ps = params.tensor_list();
    const auto gs = grads.tensor_list();
    auto ms = state.m.tensor_list();
    auto vs = state.v.tensor_list();
    if (ps.size() != gs.size() || ps.size() != ms.size() || ps.size() != vs.size())
        throw ContractViolation("adam_step: tensor lists differ");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix<T>& p = *ps[i].second;
        const Matrix<T>& g = *gs[i].second;
        Matrix<T>& m = *ms[i].second;
        Matrix<T>& v = *vs[i].second;
        if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v))
            throw ContractViolation("adam_step: shape mismatch on " + ps[i].first);
        T* pd = p.data();
        const T* gd = g.data();
        T* md = m.data();
        T* vd = v.data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            md[j] = b1 * md[j] + one_m_b1 * gd[j];
            vd[j] = b2 * vd[j] + one_m_b2 * gd[j] * gd[j];
            pd[j] -= step * md[j] / (std::sqrt(vd[j]) * denom_scale + eps);
        }
    }
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    return config.lr0 * std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_every));
}

namespace {

std::string describe_batch(const Batch& batch) {
    std::ostringstream os;
    os << "batch of " << batch.rows << " rows, max length " << batch.max_len << "; rows:";
    const std::size_t show = std::min<std::size_t>(batch.rows, 8);
    for (std::size_t r = 0; r < show; ++r) {
        os << " [";
        for (std::size_t j = 0; j < batch.lengths[r]; ++j) {
            if (j) os << ' ';
            os << batch.indices[r * batch.max_len + j];
        }
        os << " -> " << batch.labels[r] << "]";
    }
    if (show < batch.rows) os << " ...";
    return os.str();
}

}  // namespace

template <typename T>
FitResult<T> fit(const ModelConfig& model_config, const std::vector<Instance>& train_instances,
                 const std::vector<Instance>& eval_instances, const TrainConfig& train_config,
                 const ProgressSink& sink) {
    model_config.validate();
    train_config.validate();
    if (train_instances.empty()) throw DataError("fit: empty training instance set");

    FitResult<T> result;
    result.params = init_params<T>(model_config);
    auto adam = AdamState<T>::zeros(result.params);

    ModelParams<T> best = result.params;
    double best_mrr = -1.0;
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(train_config, epoch);
        double loss_sum = 0.0;
        std::size_t seen = 0;

        BatchStream stream(train_instances, train_config.batch_size, train_config.seed, epoch, /*shuffle=*/true);
        while (auto batch = stream.next()) {
            const auto cache = forward(model_config, result.params, *batch);
            const T loss = batch_loss(predict_probs(cache.scores), batch->labels, model_config.loss_mode);
            if (!std::isfinite(static_cast<double>(loss)))
                throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) + " on " +
                                   describe_batch(*batch));
            auto grads = backward(model_config, result.params, cache, batch->labels);
            l2_penalty(result.params, grads, train_config.l2);
            adam_step(adam, result.params, grads, lr);
            loss_sum += static_cast<double>(loss) * static_cast<double>(batch->rows);
            seen += batch->rows;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.lr = lr;
        entry.train_loss = loss_sum / static_cast<double>(seen);
        if (!eval_instances.empty()) {
            const auto rep =
                evaluate(model_config, result.params, eval_instances, train_config.metric_k, train_config.batch_size);
            entry.hr = rep.hr;
            entry.mrr = rep.mrr;
            entry.evaluated = true;
            if (rep.mrr > best_mrr) {
                best_mrr = rep.mrr;
                best = result.params;
                best_epoch = epoch;
            }
        }
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(entry);
        if (sink) sink(entry);
    }

    if (!eval_instances.empty() && train_config.epochs > 0) {
        result.params = std::move(best);
        result.best_epoch = best_epoch;
    } else {
        result.best_epoch = train_config.epochs == 0 ? 0 : train_config.epochs - 1;
    }
    return result;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void l2_penalty<float>(const ModelParams<float>&, ModelParams<float>&, double);
template void l2_penalty<double>(const ModelParams<double>&, ModelParams<double>&, double);
template void adam_step<float>(AdamState<float>&, ModelParams<float>&, const ModelParams<float>&, double);
template void adam_step<double>(AdamState<double>&, ModelParams<double>&, const ModelParams<double>&, double);
template struct FitResult<float>;
template struct FitResult<double>;
template FitResult<float> fit<float>(const ModelConfig&, const std::vector<Instance>&, const std::vector<Instance>&,
                                     const TrainConfig&, const ProgressSink&);
template FitResult<double> fit<double>(const ModelConfig&, const std::vector<Instance>&, const std::vector<Instance>&,
                                       const TrainConfig&, const ProgressSink&);

}  // namespace srsan
