#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srsan/commands.hpp"

namespace {

using namespace srsan;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',') {
            if (i > start) out.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& text, const std::string& flag) {
    std::vector<std::size_t> out;
    for (const auto& piece : split_list(text)) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(piece)));
        } catch (const std::exception&) {
            throw UsageError(flag + ": bad integer '" + piece + "'");
        }
    }
    return out;
}

struct Cli {
    RunConfig config;
    std::string config_path;
    std::string preset_flag;
    std::string fraction_flag;
    std::string loss_flag;
    std::string predict_flag;

    std::string data_path;
    std::string out_path;
    std::string vocab_path;
    std::string test_path;
    std::string model_path;
    std::string items_flag;
    std::string json_path;
    std::string grid_d, grid_heads, grid_layers, grid_ffn;
    std::size_t jobs = 1;
};

void add_common_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--config", cli.config_path, "config file (key = value sections)");
    cmd->add_option("--seed", cli.config.seed, "RNG seed");
}

void add_model_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--d", cli.config.d, "embedding size");
    cmd->add_option("--heads", cli.config.heads, "attention heads");
    cmd->add_option("--layers", cli.config.layers, "self-attention layers");
    cmd->add_option("--ffn-mult", cli.config.ffn_mult, "feed-forward width multiplier");
    cmd->add_option("--loss", cli.loss_flag, "loss mode: literal|ce");
    cmd->add_option("--predict", cli.predict_flag, "prediction mode: last|se");
    cmd->add_flag("--scale-per-head", cli.config.scale_per_head, "divide attention logits by sqrt(d/heads)");
}

void add_train_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--epochs", cli.config.epochs, "training epochs");
    cmd->add_option("--lr", cli.config.lr, "initial learning rate");
    cmd->add_option("--l2", cli.config.l2, "L2 regularization weight");
    cmd->add_option("--batch", cli.config.batch, "batch size");
}

/// File values must not override explicit flags: apply the config file
/// first, then re-parse the command line on top of it.
void finalize_config(CLI::App& app, Cli& cli, int argc, char** argv) {
    if (!cli.preset_flag.empty()) cli.config.apply_preset(cli.preset_flag);
    if (!cli.config_path.empty()) cli.config.apply_ini_file(cli.config_path);
    app.clear();
    app.parse(argc, argv);
    if (!cli.fraction_flag.empty()) cli.config.fraction = parse_fraction(cli.fraction_flag);
    if (!cli.loss_flag.empty()) cli.config.loss = cli.loss_flag;
    if (!cli.predict_flag.empty()) cli.config.predict = cli.predict_flag;
    loss_mode_from_string(cli.config.loss);
    prediction_mode_from_string(cli.config.predict);
}

int run(int argc, char** argv) {
    CLI::App app{"SR-SAN: session-based recommendation with self-attention networks"};
    app.require_subcommand(1);
    Cli cli;

    auto* preprocess = app.add_subcommand("preprocess", "click log -> instance files + vocabulary + stats");
    add_common_flags(preprocess, cli);
    preprocess->add_option("--data", cli.data_path, "raw click log")->required();
    preprocess->add_option("--out", cli.out_path, "output directory")->required();
    preprocess->add_option("--preset", cli.preset_flag, "dataset preset: yoochoose|diginetica|custom");
    preprocess->add_option("--fraction", cli.fraction_flag, "recency cut, e.g. 1/64 or 0.5");
    preprocess->add_option("--holdout-days", cli.config.holdout_days, "test holdout span in days");

    auto* train = app.add_subcommand("train", "train a model on an instance file");
    add_common_flags(train, cli);
    add_model_flags(train, cli);
    add_train_flags(train, cli);
    train->add_option("--data", cli.data_path, "training instance file")->required();
    train->add_option("--vocab", cli.vocab_path, "vocabulary sidecar (default: vocab.tsv next to --data)");
    train->add_option("--test", cli.test_path, "evaluation instance file for per-epoch metrics");
    train->add_option("--out", cli.out_path, "output directory")->required();
    train->add_option("--k", cli.config.k, "metric cutoff");
    train->add_option("--preset", cli.preset_flag, "model-size preset: yoochoose|diginetica");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on an instance file");
    add_common_flags(eval, cli);
    eval->add_option("--model", cli.model_path, "checkpoint path")->required();
    eval->add_option("--data", cli.data_path, "instance file")->required();
    eval->add_option("--k", cli.config.k, "metric cutoff");
    eval->add_option("--out", cli.json_path, "JSON report path");

    auto* recommend = app.add_subcommand("recommend", "top-k items for a session of raw ids");
    add_common_flags(recommend, cli);
    recommend->add_option("--model", cli.model_path, "checkpoint path")->required();
    recommend->add_option("--items", cli.items_flag, "comma-separated raw item ids")->required();
    recommend->add_option("--k", cli.config.k, "list length");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
    add_common_flags(gradcheck, cli);

    auto* sweep = app.add_subcommand("sweep", "grid sweep over d/heads/layers/ffn-mult");
    add_common_flags(sweep, cli);
    add_model_flags(sweep, cli);
    add_train_flags(sweep, cli);
    sweep->add_option("--data", cli.data_path, "training instance file")->required();
    sweep->add_option("--test", cli.test_path, "evaluation instance file")->required();
    sweep->add_option("--grid-d", cli.grid_d, "comma-separated embedding sizes");
    sweep->add_option("--grid-heads", cli.grid_heads, "comma-separated head counts");
    sweep->add_option("--grid-layers", cli.grid_layers, "comma-separated layer counts");
    sweep->add_option("--grid-ffn-mult", cli.grid_ffn, "comma-separated width multipliers");
    sweep->add_option("--jobs", cli.jobs, "concurrent grid points");
    sweep->add_option("--out", cli.json_path, "JSON results path");
    sweep->add_option("--k", cli.config.k, "metric cutoff");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        finalize_config(app, cli, argc, argv);

        if (preprocess->parsed()) {
            cmd_preprocess(cli.config, cli.data_path, cli.out_path, std::cout);
        } else if (train->parsed()) {
            std::string vocab = cli.vocab_path;
            if (vocab.empty()) {
                const auto slash = cli.data_path.find_last_of('/');
                vocab = (slash == std::string::npos ? "" : cli.data_path.substr(0, slash + 1)) + "vocab.tsv";
            }
            cmd_train(cli.config, cli.data_path, vocab, cli.test_path, cli.out_path, std::cout);
        } else if (eval->parsed()) {
            cmd_eval(cli.config, cli.model_path, cli.data_path, cli.config.k, cli.json_path, std::cout);
        } else if (recommend->parsed()) {
            cmd_recommend(cli.model_path, split_list(cli.items_flag), cli.config.k, std::cout);
        } else if (gradcheck->parsed()) {
            GradcheckOptions options;
            options.seed = cli.config.seed;
            if (!cmd_gradcheck(options, std::cout).passed) return 3;
        } else if (sweep->parsed()) {
            SweepGrid grid;
            grid.d = split_sizes(cli.grid_d, "--grid-d");
            grid.heads = split_sizes(cli.grid_heads, "--grid-heads");
            grid.layers = split_sizes(cli.grid_layers, "--grid-layers");
            grid.ffn_mult = split_sizes(cli.grid_ffn, "--grid-ffn-mult");
            cmd_sweep(cli.config, grid, cli.data_path, cli.test_path, cli.jobs, cli.json_path, std::cout);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    return run(argc, argv);
}
