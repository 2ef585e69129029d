#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "srsan/checkpoint.hpp"
#include "srsan/metrics.hpp"

using namespace srsan;

namespace {

Checkpoint make_checkpoint() {
    Checkpoint c;
    c.config.d = 8;
    c.config.heads = 2;
    c.config.layers = 1;
    c.config.ffn_mult = 2;
    c.config.vocab_size = 6;
    c.config.seed = 99;
    for (int i = 1; i <= 6; ++i) {
        const std::string raw = "item" + std::to_string(i);
        c.vocab.to_index.emplace(raw, i);
        c.vocab.to_raw.push_back(raw);
        c.vocab.counts.push_back(0);
    }
    c.params = init_params<float>(c.config);
    c.provenance = "[model]\nd = 8\n";
    return c;
}

std::string tmp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("crc32 matches the standard check value") {
    const char* s = "123456789";
    CHECK(crc32(reinterpret_cast<const unsigned char*>(s), 9) == 0xCBF43926u);
}

TEST_CASE("checkpoint round-trips every field") {
    const auto ckpt = make_checkpoint();
    const auto path = tmp_file("srsan_roundtrip.ckpt");
    save_checkpoint(path, ckpt);
    const auto back = load_checkpoint(path);

    CHECK(back.config.d == ckpt.config.d);
    CHECK(back.config.heads == ckpt.config.heads);
    CHECK(back.config.layers == ckpt.config.layers);
    CHECK(back.config.ffn_mult == ckpt.config.ffn_mult);
    CHECK(back.config.vocab_size == ckpt.config.vocab_size);
    CHECK(back.config.seed == ckpt.config.seed);
    CHECK(back.provenance == ckpt.provenance);
    CHECK(back.vocab.to_raw == ckpt.vocab.to_raw);

    const auto ta = ckpt.params.tensor_list();
    const auto tb = back.params.tensor_list();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        REQUIRE(ta[i].second->same_shape(*tb[i].second));
        CHECK(std::memcmp(ta[i].second->data(), tb[i].second->data(), ta[i].second->size() * sizeof(float)) == 0);
    }
}

TEST_CASE("loading after save yields bit-identical evaluation metrics") {
    const auto ckpt = make_checkpoint();
    const std::vector<Instance> test = {{{1, 2}, 3}, {{4, 5, 6}, 1}, {{2}, 5}};
    const auto before = evaluate(ckpt.config, ckpt.params, test, 3);
    const auto path = tmp_file("srsan_metrics.ckpt");
    save_checkpoint(path, ckpt);
    const auto back = load_checkpoint(path);
    const auto after = evaluate(back.config, back.params, test, 3);
    CHECK(before.hr == after.hr);
    CHECK(before.mrr == after.mrr);
    CHECK(before.n_hit == after.n_hit);
}

TEST_CASE("a flipped byte is refused") {
    const auto ckpt = make_checkpoint();
    const auto path = tmp_file("srsan_corrupt.ckpt");
    save_checkpoint(path, ckpt);

    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(f.tellg());
    for (const std::size_t offset : {std::size_t{10}, size / 2, size - 6}) {
        f.seekg(static_cast<std::streamoff>(offset));
        char byte;
        f.read(&byte, 1);
        byte = static_cast<char>(byte ^ 0x40);
        f.seekp(static_cast<std::streamoff>(offset));
        f.write(&byte, 1);
        f.flush();
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
        // restore
        byte = static_cast<char>(byte ^ 0x40);
        f.seekp(static_cast<std::streamoff>(offset));
        f.write(&byte, 1);
        f.flush();
    }
    CHECK_NOTHROW(load_checkpoint(path));
}

TEST_CASE("truncated checkpoints are refused") {
    const auto ckpt = make_checkpoint();
    const auto path = tmp_file("srsan_trunc.ckpt");
    save_checkpoint(path, ckpt);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("vocabulary size disagreement is rejected at save time") {
    auto ckpt = make_checkpoint();
    ckpt.vocab.to_raw.pop_back();
    CHECK_THROWS_AS(save_checkpoint(tmp_file("srsan_bad.ckpt"), ckpt), ContractViolation);
}
