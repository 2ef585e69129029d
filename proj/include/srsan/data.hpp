#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "srsan/batch.hpp"
#include "srsan/errors.hpp"

namespace srsan {

enum class TimeFormat { kIso8601, kEpochMillis, kEpochSeconds };

/// How to pull (session, timestamp, item) out of a delimited line.
struct ColumnMap {
    char delimiter = ',';
    std::size_t session_col = 0;
    std::size_t time_col = 1;
    std::size_t item_col = 2;
    TimeFormat time_format = TimeFormat::kIso8601;

    static ColumnMap yoochoose();   // yoochoose-clicks.dat
    static ColumnMap diginetica();  // train-item-views.csv
};

struct RawEvent {
    std::string session_id;
    std::int64_t timestamp_ms = 0;
    std::string item_id;
};

struct ParseResult {
    std::vector<RawEvent> events;
    std::size_t total_lines = 0;
    std::size_t malformed = 0;
};

/// "2014-04-07T10:51:09.277Z" or "2016-05-09" -> epoch milliseconds (UTC).
std::optional<std::int64_t> parse_iso8601_ms(const std::string& text);

/// Reads delimited lines; malformed lines are skipped and counted. Throws
/// DataError when more than max_malformed_fraction of lines are malformed.
ParseResult parse_events(std::istream& in, const ColumnMap& columns, double max_malformed_fraction = 0.01);
ParseResult parse_events_file(const std::string& path, const ColumnMap& columns,
                              double max_malformed_fraction = 0.01);

/// A session over raw item ids, before vocabulary mapping.
struct RawSession {
    std::vector<std::string> items;
    std::int64_t origin_time = 0;  // timestamp of the last event
};

/// A session over vocabulary indices.
struct Session {
    std::vector<std::int32_t> items;
    std::int64_t origin_time = 0;
};

/// One training/evaluation instance: a prefix and its next click.
struct Instance {
    std::vector<std::int32_t> items;
    std::int32_t label = 0;
};

/// Bijection between raw item ids and dense 1-based indices; 0 is padding.
struct Vocabulary {
    std::unordered_map<std::string, std::int32_t> to_index;
    std::vector<std::string> to_raw;   // to_raw[i - 1] is the id of index i
    std::vector<std::int64_t> counts;  // train click count per index, same layout

    std::size_t size() const { return to_raw.size(); }
    std::int32_t lookup(const std::string& raw) const {  // 0 when unknown
        auto it = to_index.find(raw);
        return it == to_index.end() ? 0 : it->second;
    }
};

/// Group events by session id (first-seen order), each session sorted by
/// timestamp ascending with ties keeping input order.
std::vector<RawSession> build_sessions(const std::vector<RawEvent>& events);

/// Single sweep: count item occurrences over all clicks, delete occurrences
/// of items seen fewer than min_item_count times, drop sessions left shorter
/// than min_session_len. Not iterated to a fixpoint.
std::vector<RawSession> filter_dataset(const std::vector<RawSession>& sessions, std::int64_t min_item_count = 5,
                                       std::size_t min_session_len = 2);

/// Time split: sessions whose origin_time lies within the final
/// holdout_duration_ms of the data span go to test. Throws DataError when
/// either side comes out empty.
std::pair<std::vector<RawSession>, std::vector<RawSession>> split_train_test(const std::vector<RawSession>& sessions,
                                                                             std::int64_t holdout_duration_ms);

/// Keep the ceil(fraction * n) sessions with the latest origin_time (ties
/// broken toward later input order); retained sessions keep input order.
std::vector<RawSession> take_recent_fraction(const std::vector<RawSession>& sessions, double fraction);

/// Indices assigned in order of first appearance; counts are click counts.
Vocabulary build_vocabulary(const std::vector<RawSession>& sessions);

/// Map raw ids through the vocabulary. Unknown items are dropped; sessions
/// left shorter than min_session_len are dropped.
std::vector<Session> map_to_indices(const std::vector<RawSession>& sessions, const Vocabulary& vocab,
                                    std::size_t min_session_len = 2);

/// Session [a,b,c,d] -> ([a]->b), ([a,b]->c), ([a,b,c]->d).
std::vector<Instance> augment_prefixes(const std::vector<Session>& sessions);

/// Deterministic batch stream: seeded shuffle per epoch, right-padding to
/// the longest row within each batch, final short batch emitted.
class BatchStream {
public:
    BatchStream(const std::vector<Instance>& instances, std::size_t batch_size, std::uint64_t seed,
                std::uint64_t epoch, bool shuffle);

    std::optional<Batch> next();
    std::size_t batch_count() const;

private:
    const std::vector<Instance>& instances_;
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
};

// Instance-file and vocabulary-sidecar formats. Lines starting with '#' are
// header/provenance comments. Instance lines are space-separated item
// indices, a tab, then the label index. Vocabulary lines are raw id, tab,
// index, written in index order.

void write_instances(const std::string& path, const std::vector<Instance>& instances,
                     const std::vector<std::string>& header_lines);
std::vector<Instance> read_instances(const std::string& path);

void write_vocabulary(const std::string& path, const Vocabulary& vocab, const std::vector<std::string>& header_lines);
Vocabulary read_vocabulary(const std::string& path);

}  // namespace srsan
