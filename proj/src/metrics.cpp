#include "srsan/metrics.hpp"

namespace srsan {

template <typename T>
std::size_t rank_of_target(const T* scores, std::size_t n_candidates, std::int32_t label) {
    if (label < 1 || static_cast<std::size_t>(label) > n_candidates)
        throw ContractViolation("rank_of_target: label " + std::to_string(label) + " outside candidate range");
    const std::size_t lcol = static_cast<std::size_t>(label - 1);
    const T zl = scores[lcol];
    std::size_t rank = 1;
    for (std::size_t i = 0; i < n_candidates; ++i) {
        if (scores[i] > zl) ++rank;
        else if (scores[i] == zl && i < lcol) ++rank;
    }
    return rank;
}

double hr_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) throw ContractViolation("hr_at_k: empty rank list");
    std::size_t hits = 0;
    for (const auto r : ranks) hits += r <= k ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) throw ContractViolation("mrr_at_k: empty rank list");
    double sum = 0.0;
    for (const auto r : ranks)
        if (r <= k) sum += 1.0 / static_cast<double>(r);
    return sum / static_cast<double>(ranks.size());
}

namespace {

MetricsReport report_from_ranks(const std::vector<std::size_t>& ranks, std::size_t k) {
    MetricsReport rep;
    rep.k = k;
    rep.n_test = ranks.size();
    for (const auto r : ranks) rep.n_hit += r <= k ? 1 : 0;
    rep.hr = hr_at_k(ranks, k);
    rep.mrr = mrr_at_k(ranks, k);
    return rep;
}

}  // namespace

template <typename T>
MetricsReport evaluate(const ModelConfig& config, const ModelParams<T>& params,
                       const std::vector<Instance>& instances, std::size_t k, std::size_t batch_size) {
    if (instances.empty()) throw DataError("evaluate: empty instance set");
    for (const auto& inst : instances) {
        for (const auto idx : inst.items)
            if (idx < 1 || static_cast<std::size_t>(idx) > config.vocab_size)
                throw DataError("evaluate: item index " + std::to_string(idx) +
                                " not covered by a vocabulary of size " + std::to_string(config.vocab_size));
        if (inst.label < 1 || static_cast<std::size_t>(inst.label) > config.vocab_size)
            throw DataError("evaluate: label " + std::to_string(inst.label) +
                            " not covered by a vocabulary of size " + std::to_string(config.vocab_size));
    }
    std::vector<std::size_t> ranks;
    ranks.reserve(instances.size());
    BatchStream stream(instances, batch_size, 0, 0, /*shuffle=*/false);
    while (auto batch = stream.next()) {
        const auto cache = forward(config, params, *batch);
        for (std::size_t r = 0; r < batch->rows; ++r)
            ranks.push_back(rank_of_target(cache.scores.row(r), config.vocab_size, batch->labels[r]));
    }
    return report_from_ranks(ranks, k);
}

MetricsReport popularity_baseline(const std::vector<Instance>& train, const std::vector<Instance>& test,
                                  std::size_t k, std::size_t vocab_size) {
    if (test.empty()) throw DataError("popularity_baseline: empty test set");
    std::vector<double> freq(vocab_size, 0.0);
    auto tally = [&](std::int32_t idx) {
        if (idx >= 1 && static_cast<std::size_t>(idx) <= vocab_size) freq[static_cast<std::size_t>(idx - 1)] += 1.0;
    };
    for (const auto& inst : train) {
        for (const auto idx : inst.items) tally(idx);
        tally(inst.label);
    }
    std::vector<std::size_t> ranks;
    ranks.reserve(test.size());
    for (const auto& inst : test) {
        if (inst.label < 1 || static_cast<std::size_t>(inst.label) > vocab_size)
            throw DataError("popularity_baseline: label outside vocabulary");
        ranks.push_back(rank_of_target(freq.data(), vocab_size, inst.label));
    }
    return report_from_ranks(ranks, k);
}

template std::size_t rank_of_target<float>(const float*, std::size_t, std::int32_t);
template std::size_t rank_of_target<double>(const double*, std::size_t, std::int32_t);
template MetricsReport evaluate<float>(const ModelConfig&, const ModelParams<float>&, const std::vector<Instance>&,
                                       std::size_t, std::size_t);
template MetricsReport evaluate<double>(const ModelConfig&, const ModelParams<double>&, const std::vector<Instance>&,
                                        std::size_t, std::size_t);

}  // namespace srsan
