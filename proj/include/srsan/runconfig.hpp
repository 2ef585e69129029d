#pragma once

#include <string>
#include <vector>

#include "srsan/data.hpp"
#include "srsan/model.hpp"
#include "srsan/trainer.hpp"

namespace srsan {

/// Everything a run needs, merged from defaults, preset, config file and
/// flags (later sources win). The echo text is embedded into every artifact.
struct RunConfig {
    // [model] — defaults follow the yoochoose preset
    std::size_t d = 96;
    std::size_t heads = 2;
    std::size_t layers = 1;
    std::size_t ffn_mult = 4;
    std::string predict = "last";   // last | se
    std::string loss = "ce";        // literal | ce
    bool scale_per_head = false;
    std::uint64_t seed = 42;

    // [train]
    double lr = 1e-3;
    double decay_factor = 0.1;
    std::size_t decay_every = 3;
    std::size_t batch = 100;
    double l2 = 1e-5;
    std::size_t epochs = 12;

    // [data]
    std::string preset = "yoochoose";  // yoochoose | diginetica | custom
    std::string delimiter = ",";
    std::size_t session_col = 0;
    std::size_t time_col = 1;
    std::size_t item_col = 2;
    std::string time_format = "iso8601";  // iso8601 | epoch_ms | epoch_s
    double fraction = 1.0 / 64.0;
    double holdout_days = 1.0;
    std::int64_t min_item_count = 5;
    std::size_t min_session_len = 2;
    double max_malformed = 0.01;

    // [eval]
    std::size_t k = 20;

    /// Applies the column map, holdout and model-size optima of a named
    /// dataset preset. Throws UsageError for unknown names.
    void apply_preset(const std::string& name);

    /// Strict "key = value" sections; unknown keys are errors.
    void apply_ini_file(const std::string& path);
    void apply_ini_text(const std::string& text, const std::string& origin);

    /// Deterministic echo of every setting, suitable for artifact headers.
    std::vector<std::string> echo_lines() const;
    std::string echo_text() const;  // echo_lines joined with '\n'

    ModelConfig model_config(std::size_t vocab_size) const;
    TrainConfig train_config() const;
    ColumnMap column_map() const;
};

/// Parses "1/64", "0.015625" and similar into a fraction in (0, 1].
double parse_fraction(const std::string& text);

}  // namespace srsan
