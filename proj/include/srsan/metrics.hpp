#pragma once

#include <cstdint>
#include <vector>

#include "srsan/data.hpp"
#include "srsan/model.hpp"

namespace srsan {

struct MetricsReport {
    std::size_t k = 20;
    std::size_t n_test = 0;
    std::size_t n_hit = 0;
    double hr = 0.0;
    double mrr = 0.0;
};

/// 1-based rank of the label among all candidates; ties are broken by
/// ascending item index: rank = 1 + |{i : z_i > z_label}| + |{i < label : z_i == z_label}|.
template <typename T>
std::size_t rank_of_target(const T* scores, std::size_t n_candidates, std::int32_t label);

double hr_at_k(const std::vector<std::size_t>& ranks, std::size_t k);
double mrr_at_k(const std::vector<std::size_t>& ranks, std::size_t k);

/// Batched forward over all instances, ranks and both metrics.
template <typename T>
MetricsReport evaluate(const ModelConfig& config, const ModelParams<T>& params,
                       const std::vector<Instance>& instances, std::size_t k, std::size_t batch_size = 100);

/// Ranks every candidate by train-set click frequency (one shared score
/// vector); a sanity floor, not a learned model.
MetricsReport popularity_baseline(const std::vector<Instance>& train, const std::vector<Instance>& test,
                                  std::size_t k, std::size_t vocab_size);

}  // namespace srsan
