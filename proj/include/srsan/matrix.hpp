#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "srsan/errors.hpp"

namespace srsan {

/// Dense row-major matrix, zero-initialized. Vectors are stored as 1xN.
/// T is float (training default) or double (gradient checking).
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}

    static Matrix filled(std::size_t rows, std::size_t cols, T value) {
        Matrix m(rows, cols);
        for (auto& x : m.data_) x = value;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T* row(std::size_t r) { return data_.data() + r * cols_; }
    const T* row(std::size_t r) const { return data_.data() + r * cols_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(T value) {
        for (auto& x : data_) x = value;
    }

    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// Non-owning view of a row-major block; what the kernels actually read.
template <typename T>
struct MatSpan {
    const T* ptr = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    MatSpan() = default;
    MatSpan(const Matrix<T>& m) : ptr(m.data()), rows(m.rows()), cols(m.cols()) {}
    MatSpan(const T* p, std::size_t r, std::size_t c) : ptr(p), rows(r), cols(c) {}

    const T* row(std::size_t r) const { return ptr + r * cols; }
    T at(std::size_t r, std::size_t c) const { return ptr[r * cols + c]; }
    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

/// View of `count` consecutive rows starting at `first`.
template <typename T>
MatSpan<T> row_block(const Matrix<T>& m, std::size_t first, std::size_t count) {
    if (first + count > m.rows())
        throw ContractViolation("row_block: rows [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") out of range for " + m.shape_str());
    return MatSpan<T>(m.row(first), count, m.cols());
}

/// Key validity along one axis: true = real item, false = padding.
/// Batched sessions always use prefix masks (right-padding convention).
struct MaskVector {
    std::vector<std::uint8_t> valid;

    std::size_t len() const { return valid.size(); }

    std::size_t count_valid() const {
        std::size_t n = 0;
        for (auto v : valid) n += v ? 1 : 0;
        return n;
    }

    bool is_prefix() const {
        bool seen_pad = false;
        for (auto v : valid) {
            if (!v) seen_pad = true;
            else if (seen_pad) return false;
        }
        return true;
    }

    static MaskVector all_valid(std::size_t n) {
        MaskVector m;
        m.valid.assign(n, 1);
        return m;
    }

    static MaskVector prefix(std::size_t n, std::size_t n_valid) {
        if (n_valid > n) throw ContractViolation("MaskVector::prefix: n_valid > n");
        MaskVector m;
        m.valid.assign(n, 0);
        for (std::size_t i = 0; i < n_valid; ++i) m.valid[i] = 1;
        return m;
    }
};

}  // namespace srsan
