#include "srsan/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "srsan/rng.hpp"

namespace srsan {

ColumnMap ColumnMap::yoochoose() {
    return ColumnMap{',', 0, 1, 2, TimeFormat::kIso8601};
}

ColumnMap ColumnMap::diginetica() {
    // sessionId;userId;itemId;timeframe;eventdate
    return ColumnMap{';', 0, 4, 2, TimeFormat::kIso8601};
}

namespace {

// Days since epoch for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, std::int64_t m, std::int64_t d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

bool parse_fixed_digits(const std::string& s, std::size_t pos, std::size_t n, std::int64_t& out) {
    if (pos + n > s.size()) return false;
    std::int64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601_ms(const std::string& text) {
    // Accepted: YYYY-MM-DD, optionally followed by T or space and
    // HH:MM:SS[.fff], optionally followed by Z.
    std::int64_t y, mo, d;
    if (!parse_fixed_digits(text, 0, 4, y)) return std::nullopt;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!parse_fixed_digits(text, 5, 2, mo) || !parse_fixed_digits(text, 8, 2, d)) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;

    std::int64_t h = 0, mi = 0, sec = 0, ms = 0;
    std::size_t pos = 10;
    if (pos < text.size()) {
        if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
        ++pos;
        if (!parse_fixed_digits(text, pos, 2, h) || pos + 8 > text.size() || text[pos + 2] != ':' ||
            text[pos + 5] != ':')
            return std::nullopt;
        if (!parse_fixed_digits(text, pos + 3, 2, mi) || !parse_fixed_digits(text, pos + 6, 2, sec))
            return std::nullopt;
        if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
        pos += 8;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            std::size_t n_digits = 0;
            std::int64_t frac = 0;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9' && n_digits < 9) {
                frac = frac * 10 + (text[pos] - '0');
                ++pos;
                ++n_digits;
            }
            if (n_digits == 0) return std::nullopt;
            while (n_digits < 3) {
                frac *= 10;
                ++n_digits;
            }
            while (n_digits > 3) {
                frac /= 10;
                --n_digits;
            }
            ms = frac;
        }
        if (pos < text.size() && text[pos] == 'Z') ++pos;
        if (pos != text.size()) return std::nullopt;
    }
    const std::int64_t days = days_from_civil(y, mo, d);
    return ((days * 24 + h) * 60 + mi) * 60000 + sec * 1000 + ms;
}

ParseResult parse_events(std::istream& in, const ColumnMap& columns, double max_malformed_fraction) {
    ParseResult result;
    const std::size_t need =
        1 + std::max(columns.session_col, std::max(columns.time_col, columns.item_col));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++result.total_lines;
        const auto fields = split(line, columns.delimiter);
        if (fields.size() < need) {
            ++result.malformed;
            continue;
        }
        const std::string session = trim(fields[columns.session_col]);
        const std::string item = trim(fields[columns.item_col]);
        const std::string tstr = trim(fields[columns.time_col]);
        std::int64_t ts = 0;
        bool ok = !session.empty() && !item.empty();
        if (ok) {
            switch (columns.time_format) {
                case TimeFormat::kIso8601: {
                    const auto parsed = parse_iso8601_ms(tstr);
                    ok = parsed.has_value();
                    if (ok) ts = *parsed;
                    break;
                }
                case TimeFormat::kEpochMillis:
                    ok = parse_int64(tstr, ts);
                    break;
                case TimeFormat::kEpochSeconds:
                    ok = parse_int64(tstr, ts);
                    ts *= 1000;
                    break;
            }
        }
        if (!ok || ts < 0) {
            ++result.malformed;
            continue;
        }
        result.events.push_back(RawEvent{session, ts, item});
    }
    if (result.total_lines > 0 &&
        static_cast<double>(result.malformed) > max_malformed_fraction * static_cast<double>(result.total_lines)) {
        throw DataError("parse_events: " + std::to_string(result.malformed) + " of " +
                        std::to_string(result.total_lines) + " lines malformed (threshold " +
                        std::to_string(max_malformed_fraction) + ")");
    }
    return result;
}

ParseResult parse_events_file(const std::string& path, const ColumnMap& columns, double max_malformed_fraction) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return parse_events(in, columns, max_malformed_fraction);
}

std::vector<RawSession> build_sessions(const std::vector<RawEvent>& events) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::vector<std::pair<std::int64_t, std::size_t>>> keyed;  // (timestamp, input position)
    std::vector<std::vector<const std::string*>> items;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        auto [it, inserted] = slot.try_emplace(e.session_id, keyed.size());
        if (inserted) {
            keyed.emplace_back();
            items.emplace_back();
        }
        keyed[it->second].emplace_back(e.timestamp_ms, i);
        items[it->second].push_back(&e.item_id);
    }
    std::vector<RawSession> sessions;
    sessions.reserve(keyed.size());
    for (std::size_t s = 0; s < keyed.size(); ++s) {
        std::vector<std::size_t> order(keyed[s].size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return keyed[s][a].first < keyed[s][b].first; });
        RawSession rs;
        rs.items.reserve(order.size());
        for (const auto i : order) rs.items.push_back(*items[s][i]);
        rs.origin_time = keyed[s][order.back()].first;
        sessions.push_back(std::move(rs));
    }
    return sessions;
}

std::vector<RawSession> filter_dataset(const std::vector<RawSession>& sessions, std::int64_t min_item_count,
                                       std::size_t min_session_len) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& s : sessions)
        for (const auto& item : s.items) ++counts[item];
    std::vector<RawSession> out;
    for (const auto& s : sessions) {
        RawSession kept;
        kept.origin_time = s.origin_time;
        for (const auto& item : s.items)
            if (counts[item] >= min_item_count) kept.items.push_back(item);
        if (kept.items.size() >= min_session_len) out.push_back(std::move(kept));
    }
    return out;
}

std::pair<std::vector<RawSession>, std::vector<RawSession>> split_train_test(const std::vector<RawSession>& sessions,
                                                                             std::int64_t holdout_duration_ms) {
    if (sessions.empty()) throw DataError("split_train_test: no sessions");
    std::int64_t span_end = sessions.front().origin_time;
    for (const auto& s : sessions) span_end = std::max(span_end, s.origin_time);
    const std::int64_t cutoff = span_end - holdout_duration_ms;
    std::vector<RawSession> train, test;
    for (const auto& s : sessions) (s.origin_time > cutoff ? test : train).push_back(s);
    if (train.empty()) throw DataError("split_train_test: training split is empty (holdout covers the whole span)");
    if (test.empty()) throw DataError("split_train_test: test split is empty");
    return {std::move(train), std::move(test)};
}

std::vector<RawSession> take_recent_fraction(const std::vector<RawSession>& sessions, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw UsageError("take_recent_fraction: fraction must be in (0, 1], got " + std::to_string(fraction));
    if (sessions.empty()) return {};
    const auto n = sessions.size();
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sessions[a].origin_time < sessions[b].origin_time; });
    std::vector<std::size_t> chosen(order.end() - static_cast<std::ptrdiff_t>(keep), order.end());
    std::sort(chosen.begin(), chosen.end());
    std::vector<RawSession> out;
    out.reserve(keep);
    for (const auto i : chosen) out.push_back(sessions[i]);
    return out;
}

Vocabulary build_vocabulary(const std::vector<RawSession>& sessions) {
    Vocabulary v;
    for (const auto& s : sessions) {
        for (const auto& item : s.items) {
            auto [it, inserted] = v.to_index.try_emplace(item, static_cast<std::int32_t>(v.to_raw.size() + 1));
            if (inserted) {
                v.to_raw.push_back(item);
                v.counts.push_back(0);
            }
            ++v.counts[static_cast<std::size_t>(it->second) - 1];
        }
    }
    return v;
}

std::vector<Session> map_to_indices(const std::vector<RawSession>& sessions, const Vocabulary& vocab,
                                    std::size_t min_session_len) {
    std::vector<Session> out;
    for (const auto& s : sessions) {
        Session mapped;
        mapped.origin_time = s.origin_time;
        for (const auto& item : s.items) {
            const auto idx = vocab.lookup(item);
            if (idx != 0) mapped.items.push_back(idx);
        }
        if (mapped.items.size() >= min_session_len) out.push_back(std::move(mapped));
    }
    return out;
}

std::vector<Instance> augment_prefixes(const std::vector<Session>& sessions) {
    std::vector<Instance> out;
    for (const auto& s : sessions) {
        for (std::size_t end = 1; end < s.items.size(); ++end) {
            Instance inst;
            inst.items.assign(s.items.begin(), s.items.begin() + static_cast<std::ptrdiff_t>(end));
            inst.label = s.items[end];
            out.push_back(std::move(inst));
        }
    }
    return out;
}

BatchStream::BatchStream(const std::vector<Instance>& instances, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t epoch, bool shuffle)
    : instances_(instances), batch_size_(batch_size) {
    if (batch_size_ < 1) throw ContractViolation("BatchStream: batch size must be >= 1");
    order_.resize(instances.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle) {
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
        rng.shuffle(order_);
    }
}

std::size_t BatchStream::batch_count() const {
    return (instances_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<Batch> BatchStream::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
    Batch b;
    b.rows = end - cursor_;
    b.max_len = 0;
    for (std::size_t i = cursor_; i < end; ++i) b.max_len = std::max(b.max_len, instances_[order_[i]].items.size());
    b.indices.assign(b.rows * b.max_len, 0);
    b.lengths.resize(b.rows);
    b.labels.resize(b.rows);
    for (std::size_t r = 0; r < b.rows; ++r) {
        const Instance& inst = instances_[order_[cursor_ + r]];
        if (inst.items.empty()) throw ContractViolation("BatchStream: empty instance");
        b.lengths[r] = inst.items.size();
        b.labels[r] = inst.label;
        for (std::size_t j = 0; j < inst.items.size(); ++j) b.indices[r * b.max_len + j] = inst.items[j];
    }
    cursor_ = end;
    return b;
}

void write_instances(const std::string& path, const std::vector<Instance>& instances,
                     const std::vector<std::string>& header_lines) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-identical reruns
    if (!out) throw DataError("cannot write instance file: " + path);
    for (const auto& h : header_lines) out << "# " << h << "\n";
    for (const auto& inst : instances) {
        for (std::size_t i = 0; i < inst.items.size(); ++i) {
            if (i) out << ' ';
            out << inst.items[i];
        }
        out << '\t' << inst.label << '\n';
    }
    if (!out) throw DataError("failed writing instance file: " + path);
}

std::vector<Instance> read_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open instance file: " + path);
    std::vector<Instance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": missing label separator");
        Instance inst;
        std::istringstream items(line.substr(0, tab));
        std::int64_t idx;
        while (items >> idx) {
            if (idx < 1 || idx > INT32_MAX)
                throw DataError(path + ":" + std::to_string(lineno) + ": item index out of range");
            inst.items.push_back(static_cast<std::int32_t>(idx));
        }
        if (inst.items.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": empty item list");
        std::int64_t label;
        if (!parse_int64(trim(line.substr(tab + 1)), label) || label < 1 || label > INT32_MAX)
            throw DataError(path + ":" + std::to_string(lineno) + ": bad label");
        inst.label = static_cast<std::int32_t>(label);
        out.push_back(std::move(inst));
    }
    return out;
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab,
                      const std::vector<std::string>& header_lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    for (const auto& h : header_lines) out << "# " << h << "\n";
    for (std::size_t i = 0; i < vocab.to_raw.size(); ++i) out << vocab.to_raw[i] << '\t' << (i + 1) << '\n';
    if (!out) throw DataError("failed writing vocabulary file: " + path);
}

Vocabulary read_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        std::int64_t idx;
        if (tab == std::string::npos || !parse_int64(line.substr(tab + 1), idx))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 'raw_id<TAB>index'");
        const std::string raw = line.substr(0, tab);
        if (idx != static_cast<std::int64_t>(v.to_raw.size()) + 1)
            throw DataError(path + ":" + std::to_string(lineno) + ": indices must be dense and in order");
        v.to_index.emplace(raw, static_cast<std::int32_t>(idx));
        v.to_raw.push_back(raw);
        v.counts.push_back(0);
    }
    if (v.to_index.size() != v.to_raw.size()) throw DataError(path + ": duplicate raw ids");
    return v;
}

}  // namespace srsan
