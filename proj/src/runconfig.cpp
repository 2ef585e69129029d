#include "srsan/runconfig.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace srsan {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    std::size_t out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw UsageError("config: bad unsigned integer for " + key + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    std::uint64_t out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw UsageError("config: bad unsigned integer for " + key + ": '" + v + "'");
    return out;
}

std::int64_t parse_i64(const std::string& v, const std::string& key) {
    std::int64_t out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw UsageError("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("config: bad number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double parse_fraction(const std::string& text) {
    const auto slash = text.find('/');
    double value = 0.0;
    if (slash != std::string::npos) {
        const double num = parse_double(trim(text.substr(0, slash)), "fraction");
        const double den = parse_double(trim(text.substr(slash + 1)), "fraction");
        if (den == 0.0) throw UsageError("fraction: division by zero in '" + text + "'");
        value = num / den;
    } else {
        value = parse_double(trim(text), "fraction");
    }
    if (!(value > 0.0) || value > 1.0)
        throw UsageError("fraction must be in (0, 1], got '" + text + "'");
    return value;
}

void RunConfig::apply_preset(const std::string& name) {
    preset = name;
    if (name == "yoochoose") {
        delimiter = ",";
        session_col = 0;
        time_col = 1;
        item_col = 2;
        time_format = "iso8601";
        holdout_days = 1.0;
        d = 96;
        heads = 2;
    } else if (name == "diginetica") {
        delimiter = ";";
        session_col = 0;
        time_col = 4;
        item_col = 2;
        time_format = "iso8601";
        holdout_days = 7.0;
        d = 48;
        heads = 8;
    } else if (name == "custom") {
        // keep whatever the file/flags said
    } else {
        throw UsageError("unknown preset '" + name + "' (expected yoochoose|diginetica|custom)");
    }
}

void RunConfig::apply_ini_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto where = origin + ":" + std::to_string(lineno);
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw UsageError(where + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section != "model" && section != "train" && section != "data" && section != "eval")
                throw UsageError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string qual = section.empty() ? key : section + "." + key;

        if (qual == "model.d") d = parse_size(value, qual);
        else if (qual == "model.heads") heads = parse_size(value, qual);
        else if (qual == "model.layers") layers = parse_size(value, qual);
        else if (qual == "model.ffn_mult") ffn_mult = parse_size(value, qual);
        else if (qual == "model.predict") predict = value;
        else if (qual == "model.loss") loss = value;
        else if (qual == "model.scale_per_head") scale_per_head = parse_bool(value, qual);
        else if (qual == "model.seed") seed = parse_u64(value, qual);
        else if (qual == "train.lr") lr = parse_double(value, qual);
        else if (qual == "train.decay_factor") decay_factor = parse_double(value, qual);
        else if (qual == "train.decay_every") decay_every = parse_size(value, qual);
        else if (qual == "train.batch") batch = parse_size(value, qual);
        else if (qual == "train.l2") l2 = parse_double(value, qual);
        else if (qual == "train.epochs") epochs = parse_size(value, qual);
        else if (qual == "data.preset") apply_preset(value);
        else if (qual == "data.delimiter") delimiter = value;
        else if (qual == "data.session_col") session_col = parse_size(value, qual);
        else if (qual == "data.time_col") time_col = parse_size(value, qual);
        else if (qual == "data.item_col") item_col = parse_size(value, qual);
        else if (qual == "data.time_format") time_format = value;
        else if (qual == "data.fraction") fraction = parse_fraction(value);
        else if (qual == "data.holdout_days") holdout_days = parse_double(value, qual);
        else if (qual == "data.min_item_count") min_item_count = parse_i64(value, qual);
        else if (qual == "data.min_session_len") min_session_len = parse_size(value, qual);
        else if (qual == "data.max_malformed") max_malformed = parse_double(value, qual);
        else if (qual == "eval.k") k = parse_size(value, qual);
        else throw UsageError(where + ": unknown key '" + qual + "'");
    }
}

void RunConfig::apply_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    apply_ini_text(buf.str(), path);
}

std::vector<std::string> RunConfig::echo_lines() const {
    std::vector<std::string> out;
    out.push_back("[model]");
    out.push_back("d = " + std::to_string(d));
    out.push_back("heads = " + std::to_string(heads));
    out.push_back("layers = " + std::to_string(layers));
    out.push_back("ffn_mult = " + std::to_string(ffn_mult));
    out.push_back("predict = " + predict);
    out.push_back("loss = " + loss);
    out.push_back(std::string("scale_per_head = ") + (scale_per_head ? "true" : "false"));
    out.push_back("seed = " + std::to_string(seed));
    out.push_back("[train]");
    out.push_back("lr = " + fmt_double(lr));
    out.push_back("decay_factor = " + fmt_double(decay_factor));
    out.push_back("decay_every = " + std::to_string(decay_every));
    out.push_back("batch = " + std::to_string(batch));
    out.push_back("l2 = " + fmt_double(l2));
    out.push_back("epochs = " + std::to_string(epochs));
    out.push_back("[data]");
    out.push_back("preset = " + preset);
    out.push_back("delimiter = " + delimiter);
    out.push_back("session_col = " + std::to_string(session_col));
    out.push_back("time_col = " + std::to_string(time_col));
    out.push_back("item_col = " + std::to_string(item_col));
    out.push_back("time_format = " + time_format);
    out.push_back("fraction = " + fmt_double(fraction));
    out.push_back("holdout_days = " + fmt_double(holdout_days));
    out.push_back("min_item_count = " + std::to_string(min_item_count));
    out.push_back("min_session_len = " + std::to_string(min_session_len));
    out.push_back("max_malformed = " + fmt_double(max_malformed));
    out.push_back("[eval]");
    out.push_back("k = " + std::to_string(k));
    return out;
}

std::string RunConfig::echo_text() const {
    std::string out;
    for (const auto& line : echo_lines()) {
        out += line;
        out += '\n';
    }
    return out;
}

ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
    ModelConfig m;
    m.d = d;
    m.heads = heads;
    m.layers = layers;
    m.ffn_mult = ffn_mult;
    m.vocab_size = vocab_size;
    m.prediction_mode = prediction_mode_from_string(predict);
    m.loss_mode = loss_mode_from_string(loss);
    m.scale_per_head = scale_per_head;
    m.seed = seed;
    m.validate();
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.lr0 = lr;
    t.decay_factor = decay_factor;
    t.decay_every = decay_every;
    t.batch_size = batch;
    t.l2 = l2;
    t.epochs = epochs;
    t.loss_mode = loss_mode_from_string(loss);
    t.seed = seed;
    t.metric_k = k;
    t.validate();
    return t;
}

ColumnMap RunConfig::column_map() const {
    ColumnMap m;
    if (delimiter == "\\t" || delimiter == "tab") m.delimiter = '\t';
    else if (delimiter.size() == 1) m.delimiter = delimiter[0];
    else throw UsageError("config: delimiter must be a single character or 'tab', got '" + delimiter + "'");
    m.session_col = session_col;
    m.time_col = time_col;
    m.item_col = item_col;
    if (time_format == "iso8601") m.time_format = TimeFormat::kIso8601;
    else if (time_format == "epoch_ms") m.time_format = TimeFormat::kEpochMillis;
    else if (time_format == "epoch_s") m.time_format = TimeFormat::kEpochSeconds;
    else throw UsageError("config: unknown time format '" + time_format + "'");
    return m;
}

}  // namespace srsan
