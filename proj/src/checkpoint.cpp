#include "srsan/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace srsan {

namespace {

constexpr std::array<char, 6> kMagic = {'S', 'R', 'S', 'A', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = make_crc_table();
    return table;
}

/// Accumulates bytes and the running checksum.
class Writer {
public:
    void u8(std::uint8_t v) { byte(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        static_assert(sizeof(float) == 4);
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) byte(static_cast<std::uint8_t>(p[i]));
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::uint32_t checksum() const { return crc_ ^ 0xFFFFFFFFu; }
    const std::vector<unsigned char>& buffer() const { return buf_; }

private:
    void byte(std::uint8_t v) {
        buf_.push_back(v);
        crc_ = crc_table()[(crc_ ^ v) & 0xFFu] ^ (crc_ >> 8);
    }
    std::vector<unsigned char> buf_;
    std::uint32_t crc_ = 0xFFFFFFFFu;
};

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        const auto* b = take(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint64_t u64() {
        std::uint64_t v = u32();
        v |= static_cast<std::uint64_t>(u32()) << 32;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        const auto* b = take(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }
    std::size_t offset() const { return off_; }

private:
    const unsigned char* take(std::size_t n) {
        if (off_ + n > n_) throw DataError("checkpoint: truncated file");
        const unsigned char* out = p_ + off_;
        off_ += n;
        return out;
    }
    const unsigned char* p_;
    std::size_t n_;
    std::size_t off_ = 0;
};

void write_tensor(Writer& w, const Matrix<float>& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) w.f32(m.data()[i]);
}

Matrix<float> read_tensor(Reader& r, std::size_t want_rows, std::size_t want_cols, const std::string& name) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != want_rows || cols != want_cols)
        throw DataError("checkpoint: tensor " + name + " has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(want_rows) + "x" +
                        std::to_string(want_cols));
    Matrix<float> m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
    return m;
}

}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = crc_table()[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    if (ckpt.vocab.size() != ckpt.config.vocab_size)
        throw ContractViolation("save_checkpoint: vocabulary size " + std::to_string(ckpt.vocab.size()) +
                                " != config vocab size " + std::to_string(ckpt.config.vocab_size));
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kVersion);

    w.u32(static_cast<std::uint32_t>(ckpt.config.d));
    w.u32(static_cast<std::uint32_t>(ckpt.config.heads));
    w.u32(static_cast<std::uint32_t>(ckpt.config.layers));
    w.u32(static_cast<std::uint32_t>(ckpt.config.ffn_mult));
    w.u32(static_cast<std::uint32_t>(ckpt.config.vocab_size));
    w.u8(ckpt.config.prediction_mode == PredictionMode::kSessionEmbedding ? 1 : 0);
    w.u8(ckpt.config.loss_mode == LossMode::kLiteralBce ? 1 : 0);
    w.u8(ckpt.config.scale_per_head ? 1 : 0);
    w.u64(ckpt.config.seed);
    w.str(ckpt.provenance);

    w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
    for (const auto& raw : ckpt.vocab.to_raw) w.str(raw);

    const auto tensors = ckpt.params.tensor_list();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        (void)name;
        write_tensor(w, *m);
    }
    const std::uint32_t checksum = w.checksum();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
    char tail[4];
    for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>(checksum >> (8 * i));
    out.write(tail, 4);
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kMagic.size() + 8) throw DataError("checkpoint: file too short: " + path);

    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
    if (crc32(bytes.data(), body) != stored)
        throw DataError("checkpoint: checksum mismatch, refusing to load: " + path);

    Reader r(bytes.data(), body);
    for (const char c : kMagic)
        if (static_cast<char>(r.u8()) != c) throw DataError("checkpoint: bad magic bytes: " + path);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.config.d = r.u32();
    ckpt.config.heads = r.u32();
    ckpt.config.layers = r.u32();
    ckpt.config.ffn_mult = r.u32();
    ckpt.config.vocab_size = r.u32();
    ckpt.config.prediction_mode = r.u8() ? PredictionMode::kSessionEmbedding : PredictionMode::kLastItem;
    ckpt.config.loss_mode = r.u8() ? LossMode::kLiteralBce : LossMode::kCategoricalCe;
    ckpt.config.scale_per_head = r.u8() != 0;
    ckpt.config.seed = r.u64();
    ckpt.config.validate();
    ckpt.provenance = r.str();

    const std::uint32_t vocab_n = r.u32();
    if (vocab_n != ckpt.config.vocab_size) throw DataError("checkpoint: vocabulary table size != config vocab size");
    for (std::uint32_t i = 0; i < vocab_n; ++i) {
        std::string raw = r.str();
        ckpt.vocab.to_index.emplace(raw, static_cast<std::int32_t>(i + 1));
        ckpt.vocab.to_raw.push_back(std::move(raw));
        ckpt.vocab.counts.push_back(0);
    }
    if (ckpt.vocab.to_index.size() != ckpt.vocab.to_raw.size())
        throw DataError("checkpoint: duplicate raw ids in vocabulary");

    // materialize expected shapes, then fill in declared order
    ModelConfig shape_cfg = ckpt.config;
    shape_cfg.seed = 0;
    ckpt.params = init_params<float>(shape_cfg);
    auto tensors = ckpt.params.tensor_list();
    const std::uint32_t tensor_n = r.u32();
    if (tensor_n != tensors.size())
        throw DataError("checkpoint: tensor count " + std::to_string(tensor_n) + " != expected " +
                        std::to_string(tensors.size()));
    for (auto& [name, m] : tensors) *m = read_tensor(r, m->rows(), m->cols(), name);
    if (r.offset() != body) throw DataError("checkpoint: trailing bytes before checksum");
    return ckpt;
}

}  // namespace srsan
