#include "srsan/commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace srsan {

namespace {

namespace fs = std::filesystem;

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir + " (" + ec.message() + ")");
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

nlohmann::json config_json(const RunConfig& config) {
    return nlohmann::json(config.echo_text());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write: " + path);
    out << text;
    if (!out) throw DataError("failed writing: " + path);
}

std::size_t count_clicks(const std::vector<Session>& sessions) {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.items.size();
    return n;
}

}  // namespace

PreprocessStats cmd_preprocess(const RunConfig& config, const std::string& data_path, const std::string& out_dir,
                               std::ostream& out) {
    const auto parsed = parse_events_file(data_path, config.column_map(), config.max_malformed);
    const auto sessions = build_sessions(parsed.events);
    const auto filtered = filter_dataset(sessions, config.min_item_count, config.min_session_len);
    const auto holdout_ms = static_cast<std::int64_t>(config.holdout_days * 86400000.0);
    auto [train_raw, test_raw] = split_train_test(filtered, holdout_ms);
    train_raw = take_recent_fraction(train_raw, config.fraction);

    const Vocabulary vocab = build_vocabulary(train_raw);
    const auto train = map_to_indices(train_raw, vocab, config.min_session_len);
    const auto test = map_to_indices(test_raw, vocab, config.min_session_len);
    if (train.empty()) throw DataError("preprocess: no training sessions survived the pipeline");
    if (test.empty()) throw DataError("preprocess: no test sessions survived the pipeline");
    const auto train_instances = augment_prefixes(train);
    const auto test_instances = augment_prefixes(test);

    PreprocessStats stats;
    stats.total_lines = parsed.total_lines;
    stats.malformed = parsed.malformed;
    stats.clicks = count_clicks(train) + count_clicks(test);
    stats.train_sessions = train.size();
    stats.test_sessions = test.size();
    stats.train_instances = train_instances.size();
    stats.test_instances = test_instances.size();
    stats.items = vocab.size();
    stats.avg_length = static_cast<double>(stats.clicks) / static_cast<double>(train.size() + test.size());

    ensure_dir(out_dir);
    const auto header = config.echo_lines();
    write_instances(join_path(out_dir, "train.txt"), train_instances, header);
    write_instances(join_path(out_dir, "test.txt"), test_instances, header);
    write_vocabulary(join_path(out_dir, "vocab.tsv"), vocab, header);

    nlohmann::json j;
    j["clicks"] = stats.clicks;
    j["train_sessions"] = stats.train_sessions;
    j["test_sessions"] = stats.test_sessions;
    j["train_instances"] = stats.train_instances;
    j["test_instances"] = stats.test_instances;
    j["items"] = stats.items;
    j["avg_length"] = stats.avg_length;
    j["input_lines"] = stats.total_lines;
    j["malformed_lines"] = stats.malformed;
    j["config"] = config_json(config);
    write_text(join_path(out_dir, "stats.json"), j.dump(2) + "\n");

    out << "all clicks:      " << stats.clicks << "\n"
        << "train sessions:  " << stats.train_instances << "  (" << stats.train_sessions << " before augmentation)\n"
        << "test sessions:   " << stats.test_instances << "  (" << stats.test_sessions << " before augmentation)\n"
        << "all items:       " << stats.items << "\n"
        << "avg length:      " << fmt(stats.avg_length, 2) << "\n"
        << "malformed lines: " << stats.malformed << " of " << stats.total_lines << "\n";
    return stats;
}

TrainOutcome cmd_train(const RunConfig& config, const std::string& train_path, const std::string& vocab_path,
                       const std::string& eval_path, const std::string& out_dir, std::ostream& out) {
    const auto train_instances = read_instances(train_path);
    if (train_instances.empty()) throw DataError("train: no instances in " + train_path);
    const Vocabulary vocab = read_vocabulary(vocab_path);
    std::vector<Instance> eval_instances;
    if (!eval_path.empty()) eval_instances = read_instances(eval_path);

    const ModelConfig model_config = config.model_config(vocab.size());
    const TrainConfig train_config = config.train_config();

    for (const auto& inst : train_instances)
        for (const auto idx : inst.items)
            if (static_cast<std::size_t>(idx) > vocab.size() || static_cast<std::size_t>(inst.label) > vocab.size())
                throw DataError("train: instance index outside the vocabulary of size " +
                                std::to_string(vocab.size()));

    ensure_dir(out_dir);
    std::ostringstream log_body;
    log_body << "# epoch\tlr\tloss\thr@" << train_config.metric_k << "\tmrr@" << train_config.metric_k
             << "\tseconds\n";
    const ProgressSink sink = [&](const EpochLog& e) {
        log_body << e.epoch << '\t' << e.lr << '\t' << fmt(e.train_loss, 6) << '\t'
                 << (e.evaluated ? fmt(e.hr, 6) : "-") << '\t' << (e.evaluated ? fmt(e.mrr, 6) : "-") << '\t'
                 << fmt(e.seconds, 3) << '\n';
        out << "epoch " << e.epoch << ": lr=" << e.lr << " loss=" << fmt(e.train_loss, 6);
        if (e.evaluated)
            out << " hr@" << train_config.metric_k << "=" << fmt(e.hr, 4) << " mrr@" << train_config.metric_k << "="
                << fmt(e.mrr, 4);
        out << " (" << fmt(e.seconds, 1) << "s)\n";
    };

    const auto result = fit<float>(model_config, train_instances, eval_instances, train_config, sink);

    TrainOutcome outcome;
    outcome.best_epoch = result.best_epoch;
    outcome.log = result.log;
    outcome.checkpoint_path = join_path(out_dir, "model.ckpt");
    outcome.log_path = join_path(out_dir, "train_log.tsv");

    Checkpoint ckpt;
    ckpt.config = model_config;
    ckpt.vocab = vocab;
    ckpt.params = result.params;
    ckpt.provenance = config.echo_text();
    save_checkpoint(outcome.checkpoint_path, ckpt);

    std::string log_text;
    for (const auto& line : config.echo_lines()) log_text += "# " + line + "\n";
    log_text += log_body.str();
    write_text(outcome.log_path, log_text);

    out << "checkpoint: " << outcome.checkpoint_path << " (best epoch " << outcome.best_epoch << ")\n";
    return outcome;
}

MetricsReport cmd_eval(const RunConfig& config, const std::string& checkpoint_path, const std::string& data_path,
                       std::size_t k, const std::string& json_path, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto instances = read_instances(data_path);
    const auto report = evaluate(ckpt.config, ckpt.params, instances, k, config.batch);

    out << "k=" << report.k << " n=" << report.n_test << " hits=" << report.n_hit << " hr@" << report.k << "="
        << fmt(report.hr, 6) << " mrr@" << report.k << "=" << fmt(report.mrr, 6) << "\n";
    if (!json_path.empty()) {
        nlohmann::json j;
        j["k"] = report.k;
        j["n_test"] = report.n_test;
        j["n_hit"] = report.n_hit;
        j["hr"] = report.hr;
        j["mrr"] = report.mrr;
        j["checkpoint"] = checkpoint_path;
        j["config"] = nlohmann::json(ckpt.provenance);
        write_text(json_path, j.dump(2) + "\n");
    }
    return report;
}

std::vector<Recommendation> cmd_recommend(const std::string& checkpoint_path,
                                          const std::vector<std::string>& raw_items, std::size_t k,
                                          std::ostream& out) {
    if (raw_items.empty()) throw DataError("recommend: empty session");
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);

    std::vector<std::int32_t> indices;
    for (const auto& raw : raw_items) {
        const auto idx = ckpt.vocab.lookup(raw);
        if (idx == 0) out << "warning: unknown item '" << raw << "' dropped\n";
        else indices.push_back(idx);
    }
    if (indices.empty()) throw DataError("recommend: no known items in session");

    Batch batch;
    batch.rows = 1;
    batch.max_len = indices.size();
    batch.indices = indices;
    batch.lengths = {indices.size()};
    batch.labels = {1};  // unused by the forward pass
    const auto cache = forward(ckpt.config, ckpt.params, batch);

    const std::size_t v = ckpt.config.vocab_size;
    std::vector<std::size_t> order(v);
    for (std::size_t i = 0; i < v; ++i) order[i] = i;
    const float* scores = cache.scores.row(0);
    const std::size_t take = std::min(k, v);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;  // ties broken by ascending item index
                      });
    std::vector<Recommendation> recs;
    recs.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        recs.push_back(Recommendation{ckpt.vocab.to_raw[order[i]], scores[order[i]]});
    for (const auto& r : recs) out << r.item << '\t' << r.score << '\n';
    return recs;
}

GradcheckReport cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
    const auto report = run_gradcheck(options);
    for (const auto& run : report.runs) {
        out << "mode predict=" << to_string(run.prediction_mode) << " loss=" << to_string(run.loss_mode) << "\n";
        for (const auto& t : run.tensors)
            out << "  " << std::left << std::setw(12) << t.tensor << " max rel err " << std::scientific
                << std::setprecision(3) << t.max_rel_err << (t.passed ? "  ok" : "  FAIL") << "\n";
    }
    out << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << options.tolerance << ")\n";
    return report;
}

std::vector<SweepPoint> cmd_sweep(const RunConfig& config, const SweepGrid& grid, const std::string& train_path,
                                  const std::string& eval_path, std::size_t jobs, const std::string& json_path,
                                  std::ostream& out) {
    auto axis = [](const std::vector<std::size_t>& v, std::size_t fallback) {
        return v.empty() ? std::vector<std::size_t>{fallback} : v;
    };
    const auto ds = axis(grid.d, config.d);
    const auto hs = axis(grid.heads, config.heads);
    const auto ls = axis(grid.layers, config.layers);
    const auto fs_ = axis(grid.ffn_mult, config.ffn_mult);

    const auto train_instances = read_instances(train_path);
    const auto eval_instances = read_instances(eval_path);
    if (train_instances.empty() || eval_instances.empty()) throw DataError("sweep: empty instance file");
    std::size_t vocab_size = 0;
    for (const auto& inst : train_instances) {
        for (const auto idx : inst.items) vocab_size = std::max<std::size_t>(vocab_size, idx);
        vocab_size = std::max<std::size_t>(vocab_size, inst.label);
    }
    for (const auto& inst : eval_instances) {
        for (const auto idx : inst.items) vocab_size = std::max<std::size_t>(vocab_size, idx);
        vocab_size = std::max<std::size_t>(vocab_size, inst.label);
    }

    std::vector<SweepPoint> points;
    for (const auto d : ds)
        for (const auto h : hs)
            for (const auto l : ls)
                for (const auto f : fs_) {
                    SweepPoint p;
                    p.d = d;
                    p.heads = h;
                    p.layers = l;
                    p.ffn_mult = f;
                    if (h == 0 || d % h != 0) {
                        p.skipped = true;
                        p.note = "skipped: d not divisible by heads";
                    }
                    points.push_back(p);
                }

    std::atomic<std::size_t> cursor{0};
    std::mutex out_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            SweepPoint& p = points[i];
            if (p.skipped) {
                std::lock_guard<std::mutex> lock(out_mutex);
                out << "d=" << p.d << " heads=" << p.heads << " layers=" << p.layers << " ffn=" << p.ffn_mult << " "
                    << p.note << "\n";
                continue;
            }
            RunConfig point_config = config;
            point_config.d = p.d;
            point_config.heads = p.heads;
            point_config.layers = p.layers;
            point_config.ffn_mult = p.ffn_mult;
            const ModelConfig mc = point_config.model_config(vocab_size);
            const TrainConfig tc = point_config.train_config();
            const auto result = fit<float>(mc, train_instances, eval_instances, tc);
            const auto& best = result.log[result.best_epoch];
            p.hr = best.hr;
            p.mrr = best.mrr;
            p.best_epoch = result.best_epoch;
            std::lock_guard<std::mutex> lock(out_mutex);
            out << "d=" << p.d << " heads=" << p.heads << " layers=" << p.layers << " ffn=" << p.ffn_mult
                << " hr=" << fmt(p.hr, 4) << " mrr=" << fmt(p.mrr, 4) << " (best epoch " << p.best_epoch << ")\n";
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < std::min(jobs, points.size()); ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        if (a.skipped != b.skipped) return !a.skipped;
        if (a.hr != b.hr) return a.hr > b.hr;
        return a.mrr > b.mrr;
    });

    out << "rank\td\theads\tlayers\tffn\thr\tmrr\n";
    std::size_t rank = 1;
    for (const auto& p : points) {
        if (p.skipped) {
            out << "-\t" << p.d << '\t' << p.heads << '\t' << p.layers << '\t' << p.ffn_mult << "\t" << p.note
                << "\n";
        } else {
            out << rank++ << '\t' << p.d << '\t' << p.heads << '\t' << p.layers << '\t' << p.ffn_mult << '\t'
                << fmt(p.hr, 4) << '\t' << fmt(p.mrr, 4) << "\n";
        }
    }

    if (!json_path.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& p : points) {
            nlohmann::json row;
            row["d"] = p.d;
            row["heads"] = p.heads;
            row["layers"] = p.layers;
            row["ffn_mult"] = p.ffn_mult;
            if (p.skipped) {
                row["skipped"] = p.note;
            } else {
                row["hr"] = p.hr;
                row["mrr"] = p.mrr;
                row["best_epoch"] = p.best_epoch;
            }
            rows.push_back(row);
        }
        nlohmann::json j;
        j["results"] = rows;
        j["config"] = config_json(config);
        write_text(json_path, j.dump(2) + "\n");
    }
    return points;
}

}  // namespace srsan
