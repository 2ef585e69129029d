#include <fstream>
#include <sstream>

#include "doctest.h"
#include "srsan/data.hpp"

using namespace srsan;

namespace {

RawSession rs(std::vector<std::string> items, std::int64_t origin = 0) {
    return RawSession{std::move(items), origin};
}

}  // namespace

TEST_CASE("iso8601 parsing matches the epoch oracle") {
    // datetime(2014, 4, 7, 10, 51, 9, 277000, UTC)
    CHECK(parse_iso8601_ms("2014-04-07T10:51:09.277Z") == 1396867869277LL);
    CHECK(parse_iso8601_ms("1970-01-01T00:00:00.000Z") == 0LL);
    CHECK(parse_iso8601_ms("1970-01-02") == 86400000LL);
    CHECK(parse_iso8601_ms("2016-05-09") == parse_iso8601_ms("2016-05-09T00:00:00Z"));
    CHECK(!parse_iso8601_ms("not a date"));
    CHECK(!parse_iso8601_ms("2014-13-01T00:00:00Z"));
    CHECK(!parse_iso8601_ms("2014-04-07T10:51"));
}

TEST_CASE("parse_events maps yoochoose-style lines") {
    std::istringstream in("s1,2014-04-07T10:51:09.277Z,214536502,0\n");
    const auto result = parse_events(in, ColumnMap::yoochoose());
    REQUIRE(result.events.size() == 1);
    CHECK(result.events[0].session_id == "s1");
    CHECK(result.events[0].timestamp_ms == 1396867869277LL);
    CHECK(result.events[0].item_id == "214536502");
    CHECK(result.malformed == 0);
}

TEST_CASE("parse_events on empty input yields nothing") {
    std::istringstream in("");
    const auto result = parse_events(in, ColumnMap::yoochoose());
    CHECK(result.events.empty());
    CHECK(result.total_lines == 0);
}

TEST_CASE("parse_events skips and counts malformed lines") {
    std::istringstream in(
        "s1,2014-04-07T10:00:00.000Z,a,0\n"
        "s1,2014-04-07T10:01:00.000Z\n"           // missing column
        "s1,garbage,b,0\n"                         // bad timestamp
        "s1,2014-04-07T10:02:00.000Z,c,0\n");
    const auto result = parse_events(in, ColumnMap::yoochoose(), 0.5);
    CHECK(result.events.size() == 2);
    CHECK(result.malformed == 2);
    CHECK(result.total_lines == 4);
}

TEST_CASE("parse_events fails past the malformed threshold") {
    std::istringstream in("bad\nbad\nbad\ns1,2014-04-07T10:00:00Z,a,0\n");
    CHECK_THROWS_AS(parse_events(in, ColumnMap::yoochoose(), 0.01), DataError);
}

TEST_CASE("parse_events reads epoch timestamp formats") {
    ColumnMap cm{',', 0, 1, 2, TimeFormat::kEpochMillis};
    std::istringstream in1("s1,1500000000123,a\n");
    CHECK(parse_events(in1, cm).events[0].timestamp_ms == 1500000000123LL);
    cm.time_format = TimeFormat::kEpochSeconds;
    std::istringstream in2("s1,1500000000,a\n");
    CHECK(parse_events(in2, cm).events[0].timestamp_ms == 1500000000000LL);
}

TEST_CASE("build_sessions orders by timestamp within a session") {
    std::vector<RawEvent> events = {
        {"x", 3000, "C"}, {"x", 1000, "A"}, {"x", 2000, "B"},
    };
    const auto sessions = build_sessions(events);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].items == std::vector<std::string>{"A", "B", "C"});
    CHECK(sessions[0].origin_time == 3000);
}

TEST_CASE("build_sessions separates interleaved ids and keeps tie order") {
    std::vector<RawEvent> events = {
        {"a", 10, "A1"}, {"b", 5, "B1"}, {"a", 20, "A2"}, {"b", 5, "B2"}, {"a", 20, "A3"},
    };
    const auto sessions = build_sessions(events);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].items == std::vector<std::string>{"A1", "A2", "A3"});  // equal ts keeps input order
    CHECK(sessions[1].items == std::vector<std::string>{"B1", "B2"});
}

TEST_CASE("filter_dataset hand trace") {
    // counts: A:3, B:2, C:2, X:1 with min_item_count=2 -> X removed, [X] dropped
    const std::vector<RawSession> sessions = {rs({"X"}), rs({"A", "B", "C"}), rs({"A", "B"}), rs({"C", "A"})};
    const auto kept = filter_dataset(sessions, 2, 2);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].items == std::vector<std::string>{"A", "B", "C"});
    CHECK(kept[1].items == std::vector<std::string>{"A", "B"});
    CHECK(kept[2].items == std::vector<std::string>{"C", "A"});
}

TEST_CASE("filter_dataset is a no-op on frequent items and long sessions") {
    const std::vector<RawSession> sessions = {rs({"A", "B"}, 1), rs({"B", "A"}, 2)};
    const auto kept = filter_dataset(sessions, 2, 2);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].items == sessions[0].items);
    CHECK(kept[1].items == sessions[1].items);
}

TEST_CASE("filter_dataset with min count one only drops short sessions") {
    const std::vector<RawSession> sessions = {rs({"A"}), rs({"B", "C"})};
    const auto kept = filter_dataset(sessions, 1, 2);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].items == std::vector<std::string>{"B", "C"});
}

TEST_CASE("split_train_test splits on the holdout boundary") {
    const std::int64_t day = 86400000;
    const std::vector<RawSession> sessions = {rs({"A", "B"}, 1 * day), rs({"B", "A"}, 10 * day)};
    const auto [train, test] = split_train_test(sessions, day);
    REQUIRE(train.size() == 1);
    REQUIRE(test.size() == 1);
    CHECK(train[0].origin_time == 1 * day);
    CHECK(test[0].origin_time == 10 * day);
}

TEST_CASE("split_train_test errors when everything lands in test") {
    const std::vector<RawSession> sessions = {rs({"A", "B"}, 1000), rs({"B", "A"}, 2000)};
    CHECK_THROWS_AS(split_train_test(sessions, 86400000), DataError);
}

TEST_CASE("take_recent_fraction keeps the ceiling of the latest sessions") {
    std::vector<RawSession> sessions;
    for (int i = 0; i < 64; ++i) sessions.push_back(rs({"A"}, i * 100));
    CHECK(take_recent_fraction(sessions, 1.0).size() == 64);
    const auto one = take_recent_fraction(sessions, 1.0 / 64.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].origin_time == 6300);

    std::vector<RawSession> hundred;
    for (int i = 0; i < 100; ++i) hundred.push_back(rs({"A"}, i));
    const auto two = take_recent_fraction(hundred, 1.0 / 64.0);  // ceil(100/64) = 2
    REQUIRE(two.size() == 2);
    CHECK(two[0].origin_time == 98);
    CHECK(two[1].origin_time == 99);
}

TEST_CASE("vocabulary assigns first-occurrence order and never index zero") {
    const std::vector<RawSession> sessions = {rs({"B", "A"}, 1), rs({"A", "C"}, 2)};
    const auto vocab = build_vocabulary(sessions);
    CHECK(vocab.size() == 3);
    CHECK(vocab.lookup("B") == 1);
    CHECK(vocab.lookup("A") == 2);
    CHECK(vocab.lookup("C") == 3);
    CHECK(vocab.lookup("missing") == 0);
    CHECK(vocab.counts[1] == 2);  // A clicked twice
}

TEST_CASE("map_to_indices drops unknown items and short remainders") {
    const std::vector<RawSession> train = {rs({"A", "B"}, 1)};
    const auto vocab = build_vocabulary(train);
    const std::vector<RawSession> test = {rs({"A", "Z", "B"}, 2), rs({"Z", "A"}, 3)};
    const auto mapped = map_to_indices(test, vocab, 2);
    REQUIRE(mapped.size() == 1);  // second session shrank to one click
    CHECK(mapped[0].items == std::vector<std::int32_t>{1, 2});
}

TEST_CASE("augment_prefixes expands sessions into prefix instances") {
    const std::vector<Session> sessions = {{{1, 2}, 0}, {{3, 4, 5, 6}, 0}};
    const auto instances = augment_prefixes(sessions);
    REQUIRE(instances.size() == 1 + 3);  // n - 1 per session
    CHECK(instances[0].items == std::vector<std::int32_t>{1});
    CHECK(instances[0].label == 2);
    CHECK(instances[1].items == std::vector<std::int32_t>{3});
    CHECK(instances[1].label == 4);
    CHECK(instances[2].items == std::vector<std::int32_t>{3, 4});
    CHECK(instances[2].label == 5);
    CHECK(instances[3].items == std::vector<std::int32_t>{3, 4, 5});
    CHECK(instances[3].label == 6);
}

TEST_CASE("augmentation preserves the counting identity and prefix order") {
    std::vector<Session> sessions;
    std::size_t expected = 0;
    for (std::size_t n = 2; n <= 9; ++n) {
        Session s;
        for (std::size_t i = 0; i < n; ++i) s.items.push_back(static_cast<std::int32_t>(i + 1));
        sessions.push_back(s);
        expected += n - 1;
    }
    const auto instances = augment_prefixes(sessions);
    CHECK(instances.size() == expected);
    for (const auto& inst : instances) {
        for (std::size_t i = 0; i < inst.items.size(); ++i)
            CHECK(inst.items[i] == static_cast<std::int32_t>(i + 1));  // strict prefix of its source
        CHECK(inst.label == static_cast<std::int32_t>(inst.items.size() + 1));
    }
}

TEST_CASE("batch stream emits padded batches with a final short batch") {
    std::vector<Instance> instances;
    for (int i = 0; i < 250; ++i) instances.push_back(Instance{{1, 2, 3}, 4});
    BatchStream stream(instances, 100, 1, 0, true);
    CHECK(stream.batch_count() == 3);
    std::vector<std::size_t> sizes;
    while (auto b = stream.next()) {
        b->validate();
        sizes.push_back(b->rows);
    }
    CHECK(sizes == std::vector<std::size_t>{100, 100, 50});
}

TEST_CASE("batch stream shuffling is seed-deterministic and epoch-dependent") {
    std::vector<Instance> instances;
    for (int i = 1; i <= 40; ++i) instances.push_back(Instance{{i}, i});
    auto first_labels = [](BatchStream s) {
        std::vector<std::int32_t> out;
        while (auto b = s.next())
            for (const auto l : b->labels) out.push_back(l);
        return out;
    };
    const auto a = first_labels(BatchStream(instances, 7, 5, 0, true));
    const auto b = first_labels(BatchStream(instances, 7, 5, 0, true));
    const auto c = first_labels(BatchStream(instances, 7, 5, 1, true));
    const auto d = first_labels(BatchStream(instances, 7, 6, 0, true));
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != d);
    const auto plain = first_labels(BatchStream(instances, 7, 5, 0, false));
    for (int i = 0; i < 40; ++i) CHECK(plain[i] == i + 1);
}

TEST_CASE("batch rows satisfy the padding invariants") {
    std::vector<Instance> instances = {{{1}, 2}, {{3, 4, 5}, 6}, {{7, 8}, 9}};
    BatchStream stream(instances, 3, 9, 0, true);
    const auto b = stream.next();
    REQUIRE(b.has_value());
    b->validate();
    CHECK(b->max_len == 3);
    for (std::size_t r = 0; r < b->rows; ++r)
        for (std::size_t j = 0; j < b->max_len; ++j)
            CHECK((b->indices[r * b->max_len + j] == 0) == (j >= b->lengths[r]));
}

TEST_CASE("instance files round-trip through write and read") {
    const std::vector<Instance> instances = {{{1, 2, 3}, 4}, {{9}, 2}};
    const std::string path = "/tmp/srsan_test_instances.txt";
    write_instances(path, instances, {"[model]", "d = 8"});
    const auto back = read_instances(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].items == instances[0].items);
    CHECK(back[0].label == 4);
    CHECK(back[1].items == instances[1].items);
    CHECK(back[1].label == 2);

    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "# [model]");
}

TEST_CASE("vocabulary sidecar round-trips and rejects sparse indices") {
    Vocabulary v;
    v.to_index = {{"apple", 1}, {"pear", 2}};
    v.to_raw = {"apple", "pear"};
    v.counts = {3, 1};
    const std::string path = "/tmp/srsan_test_vocab.tsv";
    write_vocabulary(path, v, {});
    const auto back = read_vocabulary(path);
    CHECK(back.size() == 2);
    CHECK(back.lookup("apple") == 1);
    CHECK(back.lookup("pear") == 2);

    std::ofstream bad(path);
    bad << "apple\t2\n";
    bad.close();
    CHECK_THROWS_AS(read_vocabulary(path), DataError);
}
