#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srsan/batch.hpp"
#include "srsan/kernels.hpp"
#include "srsan/matrix.hpp"

namespace srsan {

enum class PredictionMode { kLastItem, kSessionEmbedding };
enum class LossMode { kCategoricalCe, kLiteralBce };

struct ModelConfig {
    std::size_t d = 96;         // embedding size
    std::size_t heads = 2;      // attention heads
    std::size_t layers = 1;     // stacked self-attention blocks
    std::size_t ffn_mult = 4;   // feed-forward hidden width = ffn_mult * d
    std::size_t vocab_size = 0; // |V|; index 0 is padding
    PredictionMode prediction_mode = PredictionMode::kLastItem;
    LossMode loss_mode = LossMode::kCategoricalCe;
    // Attention logits are divided by sqrt(d), the full model dimension;
    // set scale_per_head for the conventional sqrt(d / heads).
    bool scale_per_head = false;
    std::uint64_t seed = 42;

    std::size_t head_dim() const { return d / heads; }
    double attention_scale() const;  // the divisor applied to q.k logits

    void validate() const;  // throws UsageError
};

template <typename T>
struct LayerParams {
    Matrix<T> wq, wk, wv;  // d x d, fused; head i uses column slice i of width d/heads
    Matrix<T> wo;          // d x d
    Matrix<T> w1;          // d x (ffn_mult * d)
    Matrix<T> b1;          // 1 x (ffn_mult * d)
    Matrix<T> w2;          // (ffn_mult * d) x d
    Matrix<T> b2;          // 1 x d
};

/// Weights of the session-embedding prediction variant.
template <typename T>
struct SessionEmbedParams {
    Matrix<T> wg1, wg2;  // d x d
    Matrix<T> q;         // 1 x d
    Matrix<T> c;         // 1 x d
    Matrix<T> w3;        // 2d x d, applied to [s_g ; h_n]
};

template <typename T>
struct ModelParams {
    Matrix<T> embed;  // (vocab_size + 1) x d; row 0 is padding, frozen at zero
    std::vector<LayerParams<T>> layers;
    std::optional<SessionEmbedParams<T>> se;

    /// Tensors in declared order (checkpoint/optimizer order):
    /// embed, per layer wq wk wv wo w1 b1 w2 b2, then wg1 wg2 q c w3 if present.
    std::vector<std::pair<std::string, Matrix<T>*>> tensor_list();
    std::vector<std::pair<std::string, const Matrix<T>*>> tensor_list() const;
};

/// Everything backward needs from forward, plus the scores.
template <typename T>
struct ForwardCache {
    std::size_t batch = 0;
    std::size_t max_len = 0;
    std::vector<std::size_t> lengths;
    std::vector<std::int32_t> indices;  // flattened batch indices
    std::vector<MaskVector> masks;      // one prefix mask per batch row

    Matrix<T> x0;  // gathered embeddings, (batch * max_len) x d

    struct Layer {
        Matrix<T> q, k, v;            // fused projections, (batch * max_len) x d
        std::vector<Matrix<T>> probs; // attention probabilities, [row * heads + head], max_len x max_len
        Matrix<T> concat;             // concatenated head outputs
        Matrix<T> f;                  // multi-head output after residual
        Matrix<T> ffn_pre;            // f * w1 + b1 before the activation
        Matrix<T> h;                  // block output
    };
    std::vector<Layer> layers;

    Matrix<T> h_last;  // batch x d, final-layer rows at position length - 1

    // session-embedding variant intermediates (empty in last-item mode)
    Matrix<T> se_gate;   // (batch * max_len) x d, sigma(u_j)
    Matrix<T> se_alpha;  // batch x max_len, attention weights over positions
    Matrix<T> se_sg;     // batch x d, global interest
    Matrix<T> se_s;      // batch x d, composed session embedding

    Matrix<T> scores;  // batch x vocab_size
};

/// All trainable entries i.i.d. N(0, 0.1^2) from the seeded stream, in
/// declared tensor order; padding embedding row zeroed afterwards.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config);

/// Zero-valued tensors with the same shapes (gradient/moment holders).
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

/// One attention head over a single session: softmax((E Wq_i)(E Wk_i)^T / scale)(E Wv_i).
template <typename T>
Matrix<T> attention_head(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& e_in,
                         std::size_t head, const MaskVector& mask);

/// Concat(head_1..head_h) Wo + E.
template <typename T>
Matrix<T> multi_head(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& e_in,
                     const MaskVector& mask);

/// relu(F W1 + b1) W2 + b2 + F.
template <typename T>
Matrix<T> ffn_block(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& f);

/// Full batched forward; cache.scores is batch x vocab_size against the tied
/// embedding table (padding row excluded from candidates).
template <typename T>
ForwardCache<T> forward(const ModelConfig& config, const ModelParams<T>& params, const Batch& batch);

/// Prediction-layer variant: scores from a composed session embedding
/// (attention-pooled global interest concatenated with h_n) instead of h_n
/// alone. Fills the se_* cache fields. Throws ContractViolation when the
/// variant weights are absent (mode mismatch).
template <typename T>
Matrix<T> session_embedding_scores(const ModelConfig& config, const ModelParams<T>& params, ForwardCache<T>& cache);

/// Row softmax of the scores.
template <typename T>
Matrix<T> predict_probs(const Matrix<T>& scores);

/// Mean loss over the batch. Literal-BCE mode sums y*log(p) + (1-y)*log(1-p)
/// over every candidate; categorical mode is -log p_target. Log arguments are
/// clamped to [1e-12, 1 - 1e-12].
template <typename T>
T batch_loss(const Matrix<T>& probs, const std::vector<std::int32_t>& targets, LossMode mode);

/// Exact reverse-mode gradients of the configured mean loss w.r.t. every
/// trainable tensor, including both embedding paths (input and tied scoring).
/// The padding embedding row's gradient is forced to zero.
template <typename T>
ModelParams<T> backward(const ModelConfig& config, const ModelParams<T>& params, const ForwardCache<T>& cache,
                        const std::vector<std::int32_t>& targets);

const char* to_string(PredictionMode m);
const char* to_string(LossMode m);
PredictionMode prediction_mode_from_string(const std::string& s);  // throws UsageError
LossMode loss_mode_from_string(const std::string& s);

}  // namespace srsan
