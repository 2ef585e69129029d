#include "srsan/model.hpp"

#include <algorithm>
#include <cmath>

#include "srsan/rng.hpp"

namespace srsan {

double ModelConfig::attention_scale() const {
    return std::sqrt(static_cast<double>(scale_per_head ? head_dim() : d));
}

void ModelConfig::validate() const {
    if (d < 1 || heads < 1 || layers < 1 || ffn_mult < 1)
        throw UsageError("model config: d, heads, layers and ffn-mult must all be >= 1");
    if (d % heads != 0)
        throw UsageError("model config: d = " + std::to_string(d) + " is not divisible by heads = " +
                         std::to_string(heads));
    if (vocab_size < 1) throw UsageError("model config: vocab size must be >= 1");
}

const char* to_string(PredictionMode m) {
    return m == PredictionMode::kLastItem ? "last" : "se";
}

const char* to_string(LossMode m) {
    return m == LossMode::kCategoricalCe ? "ce" : "literal";
}

PredictionMode prediction_mode_from_string(const std::string& s) {
    if (s == "last") return PredictionMode::kLastItem;
    if (s == "se") return PredictionMode::kSessionEmbedding;
    throw UsageError("unknown prediction mode '" + s + "' (expected last|se)");
}

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "ce") return LossMode::kCategoricalCe;
    if (s == "literal") return LossMode::kLiteralBce;
    throw UsageError("unknown loss mode '" + s + "' (expected literal|ce)");
}

template <typename T>
std::vector<std::pair<std::string, Matrix<T>*>> ModelParams<T>::tensor_list() {
    std::vector<std::pair<std::string, Matrix<T>*>> out;
    out.emplace_back("embed", &embed);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        out.emplace_back(p + "wq", &layers[l].wq);
        out.emplace_back(p + "wk", &layers[l].wk);
        out.emplace_back(p + "wv", &layers[l].wv);
        out.emplace_back(p + "wo", &layers[l].wo);
        out.emplace_back(p + "w1", &layers[l].w1);
        out.emplace_back(p + "b1", &layers[l].b1);
        out.emplace_back(p + "w2", &layers[l].w2);
        out.emplace_back(p + "b2", &layers[l].b2);
    }
    if (se) {
        out.emplace_back("se.wg1", &se->wg1);
        out.emplace_back("se.wg2", &se->wg2);
        out.emplace_back("se.q", &se->q);
        out.emplace_back("se.c", &se->c);
        out.emplace_back("se.w3", &se->w3);
    }
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> ModelParams<T>::tensor_list() const {
    std::vector<std::pair<std::string, const Matrix<T>*>> out;
    for (auto& [name, m] : const_cast<ModelParams<T>*>(this)->tensor_list()) out.emplace_back(name, m);
    return out;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config) {
    config.validate();
    ModelParams<T> p;
    p.embed = Matrix<T>(config.vocab_size + 1, config.d);
    p.layers.resize(config.layers);
    for (auto& l : p.layers) {
        l.wq = Matrix<T>(config.d, config.d);
        l.wk = Matrix<T>(config.d, config.d);
        l.wv = Matrix<T>(config.d, config.d);
        l.wo = Matrix<T>(config.d, config.d);
        l.w1 = Matrix<T>(config.d, config.ffn_mult * config.d);
        l.b1 = Matrix<T>(1, config.ffn_mult * config.d);
        l.w2 = Matrix<T>(config.ffn_mult * config.d, config.d);
        l.b2 = Matrix<T>(1, config.d);
    }
    if (config.prediction_mode == PredictionMode::kSessionEmbedding) {
        SessionEmbedParams<T> se;
        se.wg1 = Matrix<T>(config.d, config.d);
        se.wg2 = Matrix<T>(config.d, config.d);
        se.q = Matrix<T>(1, config.d);
        se.c = Matrix<T>(1, config.d);
        se.w3 = Matrix<T>(2 * config.d, config.d);
        p.se = std::move(se);
    }
    Rng rng(config.seed);
    for (auto& [name, m] : p.tensor_list()) {
        (void)name;
        T* data = m->data();
        for (std::size_t i = 0; i < m->size(); ++i) data[i] = static_cast<T>(rng.normal(0.0, 0.1));
    }
    for (std::size_t j = 0; j < config.d; ++j) p.embed(0, j) = T(0);
    return p;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
    ModelParams<T> z;
    z.embed = Matrix<T>(params.embed.rows(), params.embed.cols());
    z.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& s = params.layers[l];
        auto& d = z.layers[l];
        d.wq = Matrix<T>(s.wq.rows(), s.wq.cols());
        d.wk = Matrix<T>(s.wk.rows(), s.wk.cols());
        d.wv = Matrix<T>(s.wv.rows(), s.wv.cols());
        d.wo = Matrix<T>(s.wo.rows(), s.wo.cols());
        d.w1 = Matrix<T>(s.w1.rows(), s.w1.cols());
        d.b1 = Matrix<T>(s.b1.rows(), s.b1.cols());
        d.w2 = Matrix<T>(s.w2.rows(), s.w2.cols());
        d.b2 = Matrix<T>(s.b2.rows(), s.b2.cols());
    }
    if (params.se) {
        SessionEmbedParams<T> se;
        se.wg1 = Matrix<T>(params.se->wg1.rows(), params.se->wg1.cols());
        se.wg2 = Matrix<T>(params.se->wg2.rows(), params.se->wg2.cols());
        se.q = Matrix<T>(1, params.se->q.cols());
        se.c = Matrix<T>(1, params.se->c.cols());
        se.w3 = Matrix<T>(params.se->w3.rows(), params.se->w3.cols());
        z.se = std::move(se);
    }
    return z;
}

namespace {

/// Copy a column slice [c0, c0 + n) out of a row block.
template <typename T>
Matrix<T> take_cols(MatSpan<T> block, std::size_t c0, std::size_t n) {
    Matrix<T> out(block.rows, n);
    for (std::size_t i = 0; i < block.rows; ++i) {
        const T* src = block.row(i) + c0;
        T* dst = out.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
    }
    return out;
}

/// dst rows [r0, r0 + src.rows), columns [c0, c0 + src.cols) += src.
template <typename T>
void add_cols_at(Matrix<T>& dst, std::size_t r0, std::size_t c0, const Matrix<T>& src) {
    for (std::size_t i = 0; i < src.rows(); ++i) {
        T* d = dst.row(r0 + i) + c0;
        const T* s = src.row(i);
        for (std::size_t j = 0; j < src.cols(); ++j) d[j] += s[j];
    }
}

template <typename T>
void copy_cols_at(Matrix<T>& dst, std::size_t r0, std::size_t c0, const Matrix<T>& src) {
    for (std::size_t i = 0; i < src.rows(); ++i) {
        T* d = dst.row(r0 + i) + c0;
        const T* s = src.row(i);
        for (std::size_t j = 0; j < src.cols(); ++j) d[j] = s[j];
    }
}

/// One head from already-projected fused q/k/v blocks of a single session.
template <typename T>
Matrix<T> head_from_projections(const ModelConfig& config, MatSpan<T> q_full, MatSpan<T> k_full, MatSpan<T> v_full,
                                std::size_t head, const MaskVector& mask, Matrix<T>& probs_out) {
    const std::size_t hd = config.head_dim();
    const Matrix<T> qs = take_cols(q_full, head * hd, hd);
    const Matrix<T> ks = take_cols(k_full, head * hd, hd);
    const Matrix<T> vs = take_cols(v_full, head * hd, hd);
    Matrix<T> logits = matmul_nt(qs, ks);
    scale_inplace(logits, static_cast<T>(1.0 / config.attention_scale()));
    probs_out = masked_row_softmax(logits, mask);
    return matmul(probs_out, vs);
}

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

constexpr double kLogClampLo = 1e-12;
constexpr double kLogClampHi = 1.0 - 1e-12;

double clamped(double p) {
    if (std::isnan(p)) return p;  // keep non-finite losses detectable
    return std::min(kLogClampHi, std::max(kLogClampLo, p));
}

}  // namespace

template <typename T>
Matrix<T> attention_head(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& e_in,
                         std::size_t head, const MaskVector& mask) {
    if (head >= config.heads) throw ContractViolation("attention_head: head index out of range");
    if (e_in.rows() < 1) throw ContractViolation("attention_head: empty input");
    const Matrix<T> q = matmul(e_in, layer.wq);
    const Matrix<T> k = matmul(e_in, layer.wk);
    const Matrix<T> v = matmul(e_in, layer.wv);
    Matrix<T> probs;
    return head_from_projections(config, MatSpan<T>(q), MatSpan<T>(k), MatSpan<T>(v), head, mask, probs);
}

template <typename T>
Matrix<T> multi_head(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& e_in,
                     const MaskVector& mask) {
    const std::size_t hd = config.head_dim();
    const Matrix<T> q = matmul(e_in, layer.wq);
    const Matrix<T> k = matmul(e_in, layer.wk);
    const Matrix<T> v = matmul(e_in, layer.wv);
    Matrix<T> concat(e_in.rows(), config.d);
    for (std::size_t i = 0; i < config.heads; ++i) {
        Matrix<T> probs;
        const Matrix<T> out = head_from_projections(config, MatSpan<T>(q), MatSpan<T>(k), MatSpan<T>(v), i, mask, probs);
        copy_cols_at(concat, 0, i * hd, out);
    }
    Matrix<T> f = matmul(concat, layer.wo);
    add_inplace(f, e_in);
    return f;
}

template <typename T>
Matrix<T> ffn_block(const ModelConfig& config, const LayerParams<T>& layer, const Matrix<T>& f) {
    (void)config;
    Matrix<T> pre = matmul(f, layer.w1);
    add_row_broadcast(pre, layer.b1);
    Matrix<T> h = matmul(relu(pre), layer.w2);
    add_row_broadcast(h, layer.b2);
    add_inplace(h, f);
    return h;
}

template <typename T>
ForwardCache<T> forward(const ModelConfig& config, const ModelParams<T>& params, const Batch& batch) {
    config.validate();
    batch.validate();
    for (const auto idx : batch.indices)
        if (idx < 0 || static_cast<std::size_t>(idx) > config.vocab_size)
            throw ContractViolation("forward: item index " + std::to_string(idx) + " outside vocabulary of size " +
                                    std::to_string(config.vocab_size));

    const std::size_t b = batch.rows;
    const std::size_t t = batch.max_len;
    const std::size_t n = b * t;
    const std::size_t d = config.d;
    const std::size_t hd = config.head_dim();

    ForwardCache<T> cache;
    cache.batch = b;
    cache.max_len = t;
    cache.lengths = batch.lengths;
    cache.indices = batch.indices;
    cache.masks.reserve(b);
    for (std::size_t r = 0; r < b; ++r) cache.masks.push_back(MaskVector::prefix(t, batch.lengths[r]));

    cache.x0 = Matrix<T>(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const T* src = params.embed.row(static_cast<std::size_t>(batch.indices[i]));
        T* dst = cache.x0.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
    }

    cache.layers.resize(config.layers);
    for (std::size_t l = 0; l < config.layers; ++l) {
        const Matrix<T>& xin = l == 0 ? cache.x0 : cache.layers[l - 1].h;
        const LayerParams<T>& lp = params.layers[l];
        auto& lc = cache.layers[l];

        lc.q = matmul(xin, lp.wq);
        lc.k = matmul(xin, lp.wk);
        lc.v = matmul(xin, lp.wv);
        lc.concat = Matrix<T>(n, d);
        lc.probs.resize(b * config.heads);
        for (std::size_t r = 0; r < b; ++r) {
            const MatSpan<T> qb = row_block(lc.q, r * t, t);
            const MatSpan<T> kb = row_block(lc.k, r * t, t);
            const MatSpan<T> vb = row_block(lc.v, r * t, t);
            for (std::size_t i = 0; i < config.heads; ++i) {
                const Matrix<T> out =
                    head_from_projections(config, qb, kb, vb, i, cache.masks[r], lc.probs[r * config.heads + i]);
                copy_cols_at(lc.concat, r * t, i * hd, out);
            }
        }
        lc.f = matmul(lc.concat, lp.wo);
        add_inplace(lc.f, xin);

        lc.ffn_pre = matmul(lc.f, lp.w1);
        add_row_broadcast(lc.ffn_pre, lp.b1);
        lc.h = matmul(relu(lc.ffn_pre), lp.w2);
        add_row_broadcast(lc.h, lp.b2);
        add_inplace(lc.h, lc.f);
    }

    const Matrix<T>& h_final = cache.layers.back().h;
    cache.h_last = Matrix<T>(b, d);
    for (std::size_t r = 0; r < b; ++r) {
        const T* src = h_final.row(r * t + batch.lengths[r] - 1);
        T* dst = cache.h_last.row(r);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
    }

    if (config.prediction_mode == PredictionMode::kLastItem) {
        cache.scores = matmul_nt(MatSpan<T>(cache.h_last), row_block(params.embed, 1, config.vocab_size));
    } else {
        cache.scores = session_embedding_scores(config, params, cache);
    }
    return cache;
}

template <typename T>
Matrix<T> session_embedding_scores(const ModelConfig& config, const ModelParams<T>& params, ForwardCache<T>& cache) {
    if (!params.se)
        throw ContractViolation("session_embedding_scores: model has no session-embedding weights (mode mismatch)");
    const std::size_t b = cache.batch;
    const std::size_t t = cache.max_len;
    const std::size_t d = config.d;
    const auto& se = *params.se;
    const Matrix<T>& h_final = cache.layers.back().h;

    const Matrix<T> hw1 = matmul(h_final, se.wg1);
    const Matrix<T> g2 = matmul(cache.h_last, se.wg2);
    cache.se_gate = Matrix<T>(b * t, d);
    cache.se_alpha = Matrix<T>(b, t);
    cache.se_sg = Matrix<T>(b, d);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t j = 0; j < cache.lengths[r]; ++j) {
            const std::size_t pos = r * t + j;
            T alpha = T(0);
            T* gate = cache.se_gate.row(pos);
            for (std::size_t k = 0; k < d; ++k) {
                const T u = hw1(pos, k) + g2(r, k) + se.c(0, k);
                gate[k] = sigmoid(u);
                alpha += gate[k] * se.q(0, k);
            }
            cache.se_alpha(r, j) = alpha;
            const T* hrow = h_final.row(pos);
            T* sg = cache.se_sg.row(r);
            for (std::size_t k = 0; k < d; ++k) sg[k] += alpha * hrow[k];
        }
    }
    Matrix<T> cat(b, 2 * d);
    for (std::size_t r = 0; r < b; ++r) {
        T* dst = cat.row(r);
        const T* sg = cache.se_sg.row(r);
        const T* hl = cache.h_last.row(r);
        for (std::size_t k = 0; k < d; ++k) dst[k] = sg[k];
        for (std::size_t k = 0; k < d; ++k) dst[d + k] = hl[k];
    }
    cache.se_s = matmul(cat, se.w3);
    return matmul_nt(MatSpan<T>(cache.se_s), row_block(params.embed, 1, config.vocab_size));
}

template <typename T>
Matrix<T> predict_probs(const Matrix<T>& scores) {
    return masked_row_softmax(scores, MaskVector::all_valid(scores.cols()));
}

template <typename T>
T batch_loss(const Matrix<T>& probs, const std::vector<std::int32_t>& targets, LossMode mode) {
    if (targets.size() != probs.rows()) throw ContractViolation("batch_loss: one target per row required");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const std::int32_t label = targets[r];
        if (label < 1 || static_cast<std::size_t>(label) > probs.cols())
            throw ContractViolation("batch_loss: target " + std::to_string(label) + " outside candidate range");
        const std::size_t tcol = static_cast<std::size_t>(label - 1);
        if (mode == LossMode::kCategoricalCe) {
            total -= std::log(clamped(static_cast<double>(probs(r, tcol))));
        } else {
            for (std::size_t j = 0; j < probs.cols(); ++j) {
                const double p = clamped(static_cast<double>(probs(r, j)));
                total -= j == tcol ? std::log(p) : std::log(1.0 - p);
            }
        }
    }
    return static_cast<T>(total / static_cast<double>(probs.rows()));
}

template <typename T>
ModelParams<T> backward(const ModelConfig& config, const ModelParams<T>& params, const ForwardCache<T>& cache,
                        const std::vector<std::int32_t>& targets) {
    const std::size_t b = cache.batch;
    const std::size_t t = cache.max_len;
    const std::size_t n = b * t;
    const std::size_t d = config.d;
    const std::size_t hd = config.head_dim();
    const std::size_t v = config.vocab_size;
    if (targets.size() != b) throw ContractViolation("backward: one target per batch row required");

    ModelParams<T> grads = zeros_like(params);
    const Matrix<T> probs = predict_probs(cache.scores);

    // d(mean loss)/d(scores)
    Matrix<T> dscores(b, v);
    const T inv_b = T(1) / static_cast<T>(b);
    if (config.loss_mode == LossMode::kCategoricalCe) {
        for (std::size_t r = 0; r < b; ++r) {
            const std::size_t tcol = static_cast<std::size_t>(targets[r] - 1);
            T* out = dscores.row(r);
            const T* p = probs.row(r);
            for (std::size_t j = 0; j < v; ++j) out[j] = p[j] * inv_b;
            out[tcol] -= inv_b;
        }
    } else {
        Matrix<T> dldp(b, v);
        for (std::size_t r = 0; r < b; ++r) {
            const std::size_t tcol = static_cast<std::size_t>(targets[r] - 1);
            const T* p = probs.row(r);
            T* out = dldp.row(r);
            for (std::size_t j = 0; j < v; ++j) {
                const double pj = static_cast<double>(p[j]);
                if (pj <= kLogClampLo || pj >= kLogClampHi) {
                    out[j] = T(0);  // inside the clamp the loss is flat
                } else if (j == tcol) {
                    out[j] = static_cast<T>(-1.0 / pj) * inv_b;
                } else {
                    out[j] = static_cast<T>(1.0 / (1.0 - pj)) * inv_b;
                }
            }
        }
        dscores = softmax_grad(probs, dldp, MaskVector::all_valid(v));
    }

    // tied scoring path
    const MatSpan<T> candidates = row_block(params.embed, 1, v);
    const Matrix<T>& selected = config.prediction_mode == PredictionMode::kLastItem ? cache.h_last : cache.se_s;
    const Matrix<T> d_selected = matmul(MatSpan<T>(dscores), candidates);
    add_to_row_block(grads.embed, 1, matmul_tn(dscores, selected));

    const Matrix<T>& h_final = cache.layers.back().h;
    Matrix<T> dh(n, d);

    if (config.prediction_mode == PredictionMode::kLastItem) {
        for (std::size_t r = 0; r < b; ++r) {
            T* dst = dh.row(r * t + cache.lengths[r] - 1);
            const T* src = d_selected.row(r);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    } else {
        const auto& se = *params.se;
        auto& gse = *grads.se;

        Matrix<T> cat(b, 2 * d);
        for (std::size_t r = 0; r < b; ++r) {
            T* dst = cat.row(r);
            const T* sg = cache.se_sg.row(r);
            const T* hl = cache.h_last.row(r);
            for (std::size_t k = 0; k < d; ++k) dst[k] = sg[k];
            for (std::size_t k = 0; k < d; ++k) dst[d + k] = hl[k];
        }
        add_inplace(gse.w3, matmul_tn(cat, d_selected));
        const Matrix<T> dcat = matmul_nt(d_selected, se.w3);

        Matrix<T> dhl(b, d);
        for (std::size_t r = 0; r < b; ++r) {
            const T* src = dcat.row(r) + d;
            T* dst = dhl.row(r);
            for (std::size_t k = 0; k < d; ++k) dst[k] = src[k];
        }

        Matrix<T> du_all(n, d);
        Matrix<T> dg2(b, d);
        for (std::size_t r = 0; r < b; ++r) {
            const T* dsg = dcat.row(r);
            for (std::size_t j = 0; j < cache.lengths[r]; ++j) {
                const std::size_t pos = r * t + j;
                const T* hrow = h_final.row(pos);
                const T* gate = cache.se_gate.row(pos);
                const T alpha = cache.se_alpha(r, j);

                T dalpha = T(0);
                for (std::size_t k = 0; k < d; ++k) dalpha += dsg[k] * hrow[k];

                T* dhrow = dh.row(pos);
                for (std::size_t k = 0; k < d; ++k) dhrow[k] += alpha * dsg[k];

                T* du = du_all.row(pos);
                T* dg2r = dg2.row(r);
                T* gq = gse.q.row(0);
                T* gc = gse.c.row(0);
                for (std::size_t k = 0; k < d; ++k) {
                    gq[k] += dalpha * gate[k];
                    const T duk = dalpha * se.q(0, k) * gate[k] * (T(1) - gate[k]);
                    du[k] = duk;
                    dg2r[k] += duk;
                    gc[k] += duk;
                }
            }
        }
        add_inplace(gse.wg1, matmul_tn(h_final, du_all));
        add_inplace(dh, matmul_nt(du_all, se.wg1));
        add_inplace(gse.wg2, matmul_tn(cache.h_last, dg2));
        add_inplace(dhl, matmul_nt(dg2, se.wg2));

        for (std::size_t r = 0; r < b; ++r) {
            T* dst = dh.row(r * t + cache.lengths[r] - 1);
            const T* src = dhl.row(r);
            for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
        }
    }

    // stacked blocks, in reverse
    Matrix<T> dx = std::move(dh);
    for (std::size_t li = config.layers; li-- > 0;) {
        const auto& lc = cache.layers[li];
        const LayerParams<T>& lp = params.layers[li];
        LayerParams<T>& lg = grads.layers[li];
        const Matrix<T>& xin = li == 0 ? cache.x0 : cache.layers[li - 1].h;

        // ffn: h = relu(pre) w2 + b2 + f
        const Matrix<T> relu_pre = relu(lc.ffn_pre);
        Matrix<T> df = dx;  // residual branch
        add_inplace(lg.w2, matmul_tn(relu_pre, dx));
        add_inplace(lg.b2, col_sums(dx));
        const Matrix<T> da = matmul_nt(dx, lp.w2);
        const Matrix<T> dpre = relu_grad(lc.ffn_pre, da);
        add_inplace(lg.w1, matmul_tn(lc.f, dpre));
        add_inplace(lg.b1, col_sums(dpre));
        add_inplace(df, matmul_nt(dpre, lp.w1));

        // multi-head: f = concat wo + xin
        add_inplace(lg.wo, matmul_tn(lc.concat, df));
        const Matrix<T> dconcat = matmul_nt(df, lp.wo);
        Matrix<T> dxin = df;  // residual branch

        Matrix<T> dq(n, d), dk(n, d), dv(n, d);
        const T inv_scale = static_cast<T>(1.0 / config.attention_scale());
        for (std::size_t r = 0; r < b; ++r) {
            const MatSpan<T> qb = row_block(lc.q, r * t, t);
            const MatSpan<T> kb = row_block(lc.k, r * t, t);
            const MatSpan<T> vb = row_block(lc.v, r * t, t);
            const MatSpan<T> dconcat_b = row_block(dconcat, r * t, t);
            for (std::size_t i = 0; i < config.heads; ++i) {
                const Matrix<T>& p = lc.probs[r * config.heads + i];
                const Matrix<T> qs = take_cols(qb, i * hd, hd);
                const Matrix<T> ks = take_cols(kb, i * hd, hd);
                const Matrix<T> vs = take_cols(vb, i * hd, hd);
                const Matrix<T> dout = take_cols(dconcat_b, i * hd, hd);

                const Matrix<T> dprobs = matmul_nt(dout, vs);
                const Matrix<T> dvs = matmul_tn(p, dout);
                Matrix<T> dlogits = softmax_grad(p, dprobs, cache.masks[r]);
                scale_inplace(dlogits, inv_scale);
                const Matrix<T> dqs = matmul(dlogits, ks);
                const Matrix<T> dks = matmul_tn(dlogits, qs);

                add_cols_at(dq, r * t, i * hd, dqs);
                add_cols_at(dk, r * t, i * hd, dks);
                add_cols_at(dv, r * t, i * hd, dvs);
            }
        }
        add_inplace(lg.wq, matmul_tn(xin, dq));
        add_inplace(lg.wk, matmul_tn(xin, dk));
        add_inplace(lg.wv, matmul_tn(xin, dv));
        add_inplace(dxin, matmul_nt(dq, lp.wq));
        add_inplace(dxin, matmul_nt(dk, lp.wk));
        add_inplace(dxin, matmul_nt(dv, lp.wv));

        dx = std::move(dxin);
    }

    // embedding input path; padding row forced to zero
    for (std::size_t i = 0; i < n; ++i) {
        T* dst = grads.embed.row(static_cast<std::size_t>(cache.indices[i]));
        const T* src = dx.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (std::size_t j = 0; j < d; ++j) grads.embed(0, j) = T(0);
    return grads;
}

#define SRSAN_INSTANTIATE(T)                                                                                   \
    template struct ModelParams<T>;                                                                            \
    template ModelParams<T> init_params<T>(const ModelConfig&);                                                \
    template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                              \
    template Matrix<T> attention_head<T>(const ModelConfig&, const LayerParams<T>&, const Matrix<T>&,          \
                                         std::size_t, const MaskVector&);                                      \
    template Matrix<T> multi_head<T>(const ModelConfig&, const LayerParams<T>&, const Matrix<T>&,              \
                                     const MaskVector&);                                                       \
    template Matrix<T> ffn_block<T>(const ModelConfig&, const LayerParams<T>&, const Matrix<T>&);              \
    template ForwardCache<T> forward<T>(const ModelConfig&, const ModelParams<T>&, const Batch&);              \
    template Matrix<T> session_embedding_scores<T>(const ModelConfig&, const ModelParams<T>&, ForwardCache<T>&); \
    template Matrix<T> predict_probs<T>(const Matrix<T>&);                                                     \
    template T batch_loss<T>(const Matrix<T>&, const std::vector<std::int32_t>&, LossMode);                    \
    template ModelParams<T> backward<T>(const ModelConfig&, const ModelParams<T>&, const ForwardCache<T>&,     \
                                        const std::vector<std::int32_t>&);

SRSAN_INSTANTIATE(float)
SRSAN_INSTANTIATE(double)

#undef SRSAN_INSTANTIATE

}  // namespace srsan
