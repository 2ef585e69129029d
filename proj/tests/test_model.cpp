#include <cmath>
#include <cstring>

#include "doctest.h"
#include "oracle.hpp"
#include "srsan/model.hpp"
#include "srsan/rng.hpp"

using namespace srsan;

namespace {

ModelConfig tiny_config(PredictionMode pm = PredictionMode::kLastItem) {
    ModelConfig c;
    c.d = 8;
    c.heads = 2;
    c.layers = 1;
    c.ffn_mult = 2;
    c.vocab_size = 20;
    c.prediction_mode = pm;
    c.seed = 11;
    return c;
}

Batch single_session(const std::vector<std::int32_t>& items, std::int32_t label = 1, std::size_t pad_to = 0) {
    Batch b;
    b.rows = 1;
    b.max_len = std::max(pad_to, items.size());
    b.indices.assign(b.max_len, 0);
    for (std::size_t i = 0; i < items.size(); ++i) b.indices[i] = items[i];
    b.lengths = {items.size()};
    b.labels = {label};
    return b;
}

std::vector<std::int32_t> random_session(Rng& rng, std::size_t vocab, std::size_t len) {
    std::vector<std::int32_t> items(len);
    for (auto& v : items) v = static_cast<std::int32_t>(1 + rng.below(vocab));
    return items;
}

template <typename T>
bool bitwise_equal(const ModelParams<T>& a, const ModelParams<T>& b) {
    const auto ta = a.tensor_list();
    const auto tb = b.tensor_list();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (!ta[i].second->same_shape(*tb[i].second)) return false;
        if (std::memcmp(ta[i].second->data(), tb[i].second->data(), ta[i].second->size() * sizeof(T)) != 0)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init_params is deterministic and zeroes the padding row") {
    const auto cfg = tiny_config();
    const auto a = init_params<double>(cfg);
    const auto b = init_params<double>(cfg);
    CHECK(bitwise_equal(a, b));
    for (std::size_t j = 0; j < cfg.d; ++j) CHECK(a.embed(0, j) == 0.0);

    ModelConfig other = cfg;
    other.seed = 12;
    CHECK(!bitwise_equal(a, init_params<double>(other)));
}

TEST_CASE("init_params sample moments match the configured distribution") {
    ModelConfig cfg;
    cfg.d = 96;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ffn_mult = 4;
    cfg.vocab_size = 10500;  // ~1.1M trainable entries
    cfg.seed = 5;
    const auto params = init_params<double>(cfg);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& [name, m] : params.tensor_list()) {
        (void)name;
        for (std::size_t i = 0; i < m->size(); ++i) {
            sum += m->data()[i];
            sq += m->data()[i] * m->data()[i];
            ++n;
        }
    }
    REQUIRE(n >= 1000000);
    const double mean = sum / static_cast<double>(n);
    const double stddev = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(std::abs(mean) <= 0.001);
    CHECK(std::abs(stddev - 0.1) <= 0.001);
}

TEST_CASE("attention over a single item returns its value projection exactly") {
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    const auto& layer = params.layers[0];
    Matrix<double> e(1, cfg.d);
    for (std::size_t j = 0; j < cfg.d; ++j) e(0, j) = params.embed(3, j);
    const auto mask = MaskVector::all_valid(1);
    for (std::size_t head = 0; head < cfg.heads; ++head) {
        const auto out = attention_head(cfg, layer, e, head, mask);
        const auto v = matmul(e, layer.wv);
        for (std::size_t j = 0; j < cfg.head_dim(); ++j) CHECK(out(0, j) == v(0, head * cfg.head_dim() + j));
    }
}

TEST_CASE("identical items produce identical attention rows") {
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    Matrix<double> e(2, cfg.d);
    for (std::size_t j = 0; j < cfg.d; ++j) e(0, j) = e(1, j) = params.embed(7, j);
    const auto out = attention_head(cfg, params.layers[0], e, 0, MaskVector::all_valid(2));
    for (std::size_t j = 0; j < out.cols(); ++j) CHECK(out(0, j) == out(1, j));
}

TEST_CASE("multi_head with zero output projection is the identity on its input") {
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg);
    params.layers[0].wo.fill(0.0);
    Rng rng(21);
    Matrix<double> e(4, cfg.d);
    for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.normal(0, 1);
    const auto f = multi_head(cfg, params.layers[0], e, MaskVector::all_valid(4));
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(f.data()[i] == e.data()[i]);
}

TEST_CASE("multi_head with one head is that head through the projection") {
    auto cfg = tiny_config();
    cfg.heads = 1;
    const auto params = init_params<double>(cfg);
    Rng rng(22);
    Matrix<double> e(3, cfg.d);
    for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = rng.normal(0, 1);
    const auto mask = MaskVector::all_valid(3);
    const auto f = multi_head(cfg, params.layers[0], e, mask);
    auto expect = matmul(attention_head(cfg, params.layers[0], e, 0, mask), params.layers[0].wo);
    add_inplace(expect, e);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("ffn_block residual passthrough and bias broadcast") {
    auto cfg = tiny_config();
    auto params = init_params<double>(cfg);
    auto& layer = params.layers[0];
    Rng rng(23);
    Matrix<double> f(3, cfg.d);
    for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = rng.normal(0, 1);

    layer.w1.fill(0.0);
    layer.w2.fill(0.0);
    layer.b1.fill(0.0);
    layer.b2.fill(0.0);
    auto h = ffn_block(cfg, layer, f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(h.data()[i] == f.data()[i]);

    layer.b2.fill(2.5);
    h = ffn_block(cfg, layer, f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(h.data()[i] == f.data()[i] + 2.5);
}

TEST_CASE("forward with all weights zero scores by embedding dot products exactly") {
    for (const std::size_t layers : {std::size_t{1}, std::size_t{3}}) {
        auto cfg = tiny_config();
        cfg.layers = layers;
        auto params = init_params<double>(cfg);
        for (auto& [name, m] : params.tensor_list())
            if (name != "embed") m->fill(0.0);
        for (const auto& items : {std::vector<std::int32_t>{7}, std::vector<std::int32_t>{4, 9, 2}}) {
            const auto batch = single_session(items, 1);
            const auto cache = forward(cfg, params, batch);
            // residuals carry the embeddings through every block: h_n == e_last
            const auto last = static_cast<std::size_t>(items.back());
            for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < cfg.d; ++j) dot += params.embed(last, j) * params.embed(i + 1, j);
                CHECK(cache.scores(0, i) == dot);
            }
        }
    }
}

TEST_CASE("batched fused forward matches the straight-line reference") {
    for (const auto pm : {PredictionMode::kLastItem, PredictionMode::kSessionEmbedding}) {
        auto cfg = tiny_config(pm);
        for (const std::size_t layers : {std::size_t{1}, std::size_t{2}}) {
            cfg.layers = layers;
            cfg.seed = 31 + layers;
            const auto params = init_params<double>(cfg);
            Rng rng(100 + layers);
            for (int trial = 0; trial < 25; ++trial) {
                const auto items = random_session(rng, cfg.vocab_size, 1 + rng.below(5));
                // pad beyond the session length to exercise masking
                const auto batch = single_session(items, 1, items.size() + rng.below(3));
                const auto cache = forward(cfg, params, batch);
                const auto expect = oracle::forward_scores(cfg, params, items);
                for (std::size_t i = 0; i < cfg.vocab_size; ++i)
                    CHECK(cache.scores(0, i) == doctest::Approx(expect[i]).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("multi-session batches score like one-session batches") {
    const auto cfg = tiny_config();
    const auto params = init_params<float>(cfg);
    Rng rng(41);
    Batch batch;
    batch.rows = 4;
    batch.max_len = 6;
    batch.indices.assign(batch.rows * batch.max_len, 0);
    for (std::size_t r = 0; r < batch.rows; ++r) {
        const std::size_t len = 1 + rng.below(6);
        batch.lengths.push_back(len);
        batch.labels.push_back(1);
        for (std::size_t j = 0; j < len; ++j)
            batch.indices[r * batch.max_len + j] = static_cast<std::int32_t>(1 + rng.below(cfg.vocab_size));
    }
    const auto cache = forward(cfg, params, batch);
    for (std::size_t r = 0; r < batch.rows; ++r) {
        std::vector<std::int32_t> items(batch.row(r), batch.row(r) + batch.lengths[r]);
        const auto solo = forward(cfg, params, single_session(items));
        for (std::size_t i = 0; i < cfg.vocab_size; ++i)
            CHECK(cache.scores(r, i) == doctest::Approx(solo.scores(0, i)).epsilon(1e-6));
    }
}

TEST_CASE("permuting all but the last item leaves scores unchanged") {
    const auto cfg = tiny_config();
    const auto params = init_params<float>(cfg);
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        auto items = random_session(rng, cfg.vocab_size, 2 + rng.below(6));
        const auto base = forward(cfg, params, single_session(items));
        std::vector<std::int32_t> prefix(items.begin(), items.end() - 1);
        rng.shuffle(prefix);
        std::copy(prefix.begin(), prefix.end(), items.begin());
        const auto permuted = forward(cfg, params, single_session(items));
        for (std::size_t i = 0; i < cfg.vocab_size; ++i)
            CHECK(base.scores(0, i) == doctest::Approx(permuted.scores(0, i)).epsilon(1e-5));
    }
}

TEST_CASE("permutation invariance holds at 64-bit and for deeper stacks") {
    for (const std::size_t layers : {std::size_t{1}, std::size_t{2}}) {
        auto cfg = tiny_config();
        cfg.layers = layers;
        const auto params = init_params<double>(cfg);
        Rng rng(45 + layers);
        for (int trial = 0; trial < 30; ++trial) {
            auto items = random_session(rng, cfg.vocab_size, 2 + rng.below(6));
            const auto base = forward(cfg, params, single_session(items));
            std::vector<std::int32_t> prefix(items.begin(), items.end() - 1);
            rng.shuffle(prefix);
            std::copy(prefix.begin(), prefix.end(), items.begin());
            const auto permuted = forward(cfg, params, single_session(items));
            for (std::size_t i = 0; i < cfg.vocab_size; ++i)
                CHECK(std::abs(base.scores(0, i) - permuted.scores(0, i)) <= 1e-9);
        }
    }
}

TEST_CASE("appending padding never changes scores") {
    for (const auto pm : {PredictionMode::kLastItem, PredictionMode::kSessionEmbedding}) {
        const auto cfg = tiny_config(pm);
        const auto params = init_params<float>(cfg);
        Rng rng(43);
        for (int trial = 0; trial < 50; ++trial) {
            const auto items = random_session(rng, cfg.vocab_size, 1 + rng.below(5));
            const auto tight = forward(cfg, params, single_session(items));
            const auto padded = forward(cfg, params, single_session(items, 1, items.size() + 1 + rng.below(4)));
            for (std::size_t i = 0; i < cfg.vocab_size; ++i)
                CHECK(tight.scores(0, i) == doctest::Approx(padded.scores(0, i)).epsilon(1e-6));
        }
    }
}

TEST_CASE("attention rows sum to one and masked keys get exactly zero") {
    const auto cfg = tiny_config();
    const auto params = init_params<float>(cfg);
    const auto batch = single_session({5, 6, 7}, 1, 6);
    const auto cache = forward(cfg, params, batch);
    for (const auto& probs : cache.layers[0].probs) {
        for (std::size_t qrow = 0; qrow < probs.rows(); ++qrow) {
            float sum = 0.0f;
            for (std::size_t j = 0; j < probs.cols(); ++j) {
                sum += probs(qrow, j);
                if (j >= 3) CHECK(probs(qrow, j) == 0.0f);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("stacked single layer equals the explicit block composition") {
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    const std::vector<std::int32_t> items = {3, 14, 9, 9};
    const auto batch = single_session(items);
    const auto cache = forward(cfg, params, batch);

    Matrix<double> e(items.size(), cfg.d);
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = 0; j < cfg.d; ++j) e(i, j) = params.embed(static_cast<std::size_t>(items[i]), j);
    const auto mask = MaskVector::all_valid(items.size());
    const auto h = ffn_block(cfg, params.layers[0], multi_head(cfg, params.layers[0], e, mask));
    for (std::size_t i = 0; i < h.size(); ++i)
        CHECK(h.data()[i] == doctest::Approx(cache.layers[0].h.data()[i]).epsilon(1e-12));
}

TEST_CASE("predict_probs examples and properties") {
    Matrix<double> flat = Matrix<double>::filled(1, 4, 1.25);
    auto p = predict_probs(flat);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p(0, i) == doctest::Approx(0.25).epsilon(1e-12));

    Matrix<double> two(1, 2);
    two(0, 0) = std::log(2.0);
    p = predict_probs(two);
    CHECK(p(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Rng rng(44);
    Matrix<double> scores(5, 9);
    for (std::size_t i = 0; i < scores.size(); ++i) scores.data()[i] = rng.normal(0, 2);
    p = predict_probs(scores);
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        double sum = 0.0;
        std::size_t amax_z = 0, amax_p = 0;
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            sum += p(r, j);
            CHECK(p(r, j) > 0.0);
            if (scores(r, j) > scores(r, amax_z)) amax_z = j;
            if (p(r, j) > p(r, amax_p)) amax_p = j;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(amax_z == amax_p);
    }
}

TEST_CASE("backward is deterministic and keeps the padding row at zero") {
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    const auto batch = single_session({4, 9, 2}, 6);
    const auto cache = forward(cfg, params, batch);
    const auto g1 = backward(cfg, params, cache, batch.labels);
    const auto g2 = backward(cfg, params, cache, batch.labels);
    CHECK(bitwise_equal(g1, g2));
    for (std::size_t j = 0; j < cfg.d; ++j) CHECK(g1.embed(0, j) == 0.0);
}

TEST_CASE("every candidate embedding receives gradient through the softmax denominator") {
    // Under a full softmax there is no dead candidate: an item absent from
    // the batch and not the target still moves the normalizer.
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    const auto batch = single_session({4, 9, 2}, 6);
    const auto cache = forward(cfg, params, batch);
    const auto grads = backward(cfg, params, cache, batch.labels);
    const std::int32_t absent = 17;  // not in the session, not the target
    double norm = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) norm += std::abs(grads.embed(static_cast<std::size_t>(absent), j));
    CHECK(norm > 0.0);
}

TEST_CASE("session embedding with one position reduces to its own algebra") {
    const auto cfg = tiny_config(PredictionMode::kSessionEmbedding);
    const auto params = init_params<double>(cfg);
    const auto batch = single_session({12});
    const auto cache = forward(cfg, params, batch);
    REQUIRE(cache.se_alpha.cols() >= 1);
    const double alpha = cache.se_alpha(0, 0);
    // s_g = alpha * h_1
    for (std::size_t j = 0; j < cfg.d; ++j)
        CHECK(cache.se_sg(0, j) == doctest::Approx(alpha * cache.h_last(0, j)).epsilon(1e-12));
}

TEST_CASE("session embedding with a selector matrix reduces to last-item scores") {
    auto cfg = tiny_config(PredictionMode::kSessionEmbedding);
    auto params = init_params<double>(cfg);
    // w3 = [0 ; I] picks h_n out of [s_g ; h_n]
    params.se->w3.fill(0.0);
    for (std::size_t j = 0; j < cfg.d; ++j) params.se->w3(cfg.d + j, j) = 1.0;
    const auto batch = single_session({3, 8, 15, 1}, 2);
    const auto cache = forward(cfg, params, batch);

    ModelConfig last_cfg = cfg;
    last_cfg.prediction_mode = PredictionMode::kLastItem;
    ModelParams<double> last_params;
    last_params.embed = params.embed;
    last_params.layers = params.layers;
    const auto last_cache = forward(last_cfg, last_params, batch);
    for (std::size_t i = 0; i < cfg.vocab_size; ++i) CHECK(cache.scores(0, i) == last_cache.scores(0, i));
}

TEST_CASE("session_embedding_scores requires the variant weights") {
    const auto cfg = tiny_config();
    const auto params = init_params<double>(cfg);
    const auto batch = single_session({4, 9});
    auto cache = forward(cfg, params, batch);
    CHECK_THROWS_AS(session_embedding_scores(cfg, params, cache), ContractViolation);
}

TEST_CASE("forward rejects out-of-range indices before computing") {
    const auto cfg = tiny_config();
    const auto params = init_params<float>(cfg);
    const auto batch = single_session({4, 21});  // vocab is 20
    CHECK_THROWS_AS(forward(cfg, params, batch), ContractViolation);
}

TEST_CASE("config validation rejects head mismatch") {
    ModelConfig bad = tiny_config();
    bad.heads = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("per-head scaling switch changes the attention divisor") {
    auto cfg = tiny_config();
    CHECK(cfg.attention_scale() == doctest::Approx(std::sqrt(8.0)));
    cfg.scale_per_head = true;
    CHECK(cfg.attention_scale() == doctest::Approx(std::sqrt(4.0)));

    const auto params = init_params<double>(cfg);
    const auto batch = single_session({4, 9, 2});
    const auto scores_per_head = forward(cfg, params, batch).scores;
    cfg.scale_per_head = false;
    const auto scores_literal = forward(cfg, params, batch).scores;
    double diff = 0.0;
    for (std::size_t i = 0; i < cfg.vocab_size; ++i)
        diff = std::max(diff, std::abs(scores_per_head(0, i) - scores_literal(0, i)));
    CHECK(diff > 0.0);
}
