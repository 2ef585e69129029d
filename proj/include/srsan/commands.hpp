#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srsan/checkpoint.hpp"
#include "srsan/gradcheck.hpp"
#include "srsan/metrics.hpp"
#include "srsan/runconfig.hpp"
#include "srsan/trainer.hpp"

namespace srsan {

// Subcommand entry points. The CLI binary parses flags into these calls;
// tests drive them directly. All outputs embed the run's config echo and
// contain nothing run-dependent, so reruns are byte-identical.

struct PreprocessStats {
    std::size_t total_lines = 0;
    std::size_t malformed = 0;
    std::size_t clicks = 0;  // clicks surviving the full pipeline (train + test)
    std::size_t train_sessions = 0;  // raw sessions before prefix augmentation
    std::size_t test_sessions = 0;
    std::size_t train_instances = 0;  // after prefix augmentation
    std::size_t test_instances = 0;
    std::size_t items = 0;
    double avg_length = 0.0;  // clicks / raw sessions
};

/// parse -> build -> filter -> split -> recency cut -> vocabulary ->
/// restrict test -> augment. Writes train.txt, test.txt, vocab.tsv and
/// stats.json under out_dir and prints a summary.
PreprocessStats cmd_preprocess(const RunConfig& config, const std::string& data_path, const std::string& out_dir,
                               std::ostream& out);

struct TrainOutcome {
    std::string checkpoint_path;
    std::string log_path;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> log;
};

/// Trains on an instance file; eval_path may be empty (no per-epoch metrics,
/// final-epoch params kept). Writes the best checkpoint and the epoch log.
TrainOutcome cmd_train(const RunConfig& config, const std::string& train_path, const std::string& vocab_path,
                       const std::string& eval_path, const std::string& out_dir, std::ostream& out);

/// Evaluates a checkpoint; writes a JSON report when json_path is non-empty.
MetricsReport cmd_eval(const RunConfig& config, const std::string& checkpoint_path, const std::string& data_path,
                       std::size_t k, const std::string& json_path, std::ostream& out);

struct Recommendation {
    std::string item;
    float score = 0.0f;
};

/// Top-k next-item recommendations for a raw-id session. Unknown items are
/// dropped with a warning; an all-unknown session is a DataError.
std::vector<Recommendation> cmd_recommend(const std::string& checkpoint_path,
                                          const std::vector<std::string>& raw_items, std::size_t k,
                                          std::ostream& out);

/// Runs the finite-difference suite and prints one line per tensor per mode.
GradcheckReport cmd_gradcheck(const GradcheckOptions& options, std::ostream& out);

struct SweepPoint {
    std::size_t d = 0, heads = 0, layers = 0, ffn_mult = 0;
    double hr = 0.0;
    double mrr = 0.0;
    std::size_t best_epoch = 0;
    bool skipped = false;
    std::string note;
};

struct SweepGrid {
    std::vector<std::size_t> d;
    std::vector<std::size_t> heads;
    std::vector<std::size_t> layers;
    std::vector<std::size_t> ffn_mult;
};

/// Trains and evaluates every grid point over shared data; invalid points
/// (d not divisible by heads) are skipped with a notice. Results are sorted
/// by HR then MRR, descending. jobs > 1 runs points concurrently with
/// isolated parameter sets; results do not depend on jobs.
std::vector<SweepPoint> cmd_sweep(const RunConfig& config, const SweepGrid& grid, const std::string& train_path,
                                  const std::string& eval_path, std::size_t jobs, const std::string& json_path,
                                  std::ostream& out);

}  // namespace srsan
