#pragma once

#include <cstdint>
#include <string>

#include "srsan/data.hpp"
#include "srsan/model.hpp"

namespace srsan {

/// Binary checkpoint: magic "SRSAN\0", version u32, model config, a
/// provenance text block, the vocabulary table, then every parameter tensor
/// in declared order as little-endian binary32 with a shape header, and a
/// trailing CRC32 of all prior bytes. Tensors are stored as binary32
/// regardless of the training precision.
struct Checkpoint {
    ModelConfig config;
    Vocabulary vocab;
    ModelParams<float> params;
    std::string provenance;  // config echo of the producing run
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Validates magic, version, checksum and tensor shapes; throws DataError
/// on any mismatch (corrupt checkpoints are refused).
Checkpoint load_checkpoint(const std::string& path);

/// CRC-32 (IEEE 802.3, reflected 0xEDB88320), used for the trailing checksum.
std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace srsan
