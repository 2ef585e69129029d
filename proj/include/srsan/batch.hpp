#pragma once

#include <cstdint>
#include <vector>

#include "srsan/errors.hpp"

namespace srsan {

/// Right-padded index matrix with per-row lengths and labels.
/// indices[r * max_len + j] == 0 exactly when j >= lengths[r].
struct Batch {
    std::size_t rows = 0;
    std::size_t max_len = 0;
    std::vector<std::int32_t> indices;   // rows x max_len, row-major, 0 = padding
    std::vector<std::size_t> lengths;    // each >= 1
    std::vector<std::int32_t> labels;    // 1-based vocabulary indices

    const std::int32_t* row(std::size_t r) const { return indices.data() + r * max_len; }

    void validate() const {
        if (indices.size() != rows * max_len || lengths.size() != rows || labels.size() != rows)
            throw ContractViolation("Batch: inconsistent field sizes");
        for (std::size_t r = 0; r < rows; ++r) {
            if (lengths[r] < 1 || lengths[r] > max_len) throw ContractViolation("Batch: bad row length");
            for (std::size_t j = 0; j < max_len; ++j) {
                const bool pad = indices[r * max_len + j] == 0;
                if (pad != (j >= lengths[r])) throw ContractViolation("Batch: padding does not match length");
            }
            if (labels[r] < 1) throw ContractViolation("Batch: label must be a real item index");
        }
    }
};

}  // namespace srsan
