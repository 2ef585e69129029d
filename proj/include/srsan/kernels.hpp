#pragma once

#include <utility>

#include "srsan/matrix.hpp"

namespace srsan {

// Dense kernels covering exactly the forward operations and analytic
// gradients the model graph needs. All kernels are pure functions over
// immutable inputs and deterministic within a precision mode.

/// c = a x b. Throws ContractViolation on inner-dimension mismatch.
template <typename T>
Matrix<T> matmul(MatSpan<T> a, MatSpan<T> b);

/// c = a x b^T.
template <typename T>
Matrix<T> matmul_nt(MatSpan<T> a, MatSpan<T> b);

/// c = a^T x b.
template <typename T>
Matrix<T> matmul_tn(MatSpan<T> a, MatSpan<T> b);

/// Gradients of c = a x b: grad_a = upstream x b^T, grad_b = a^T x upstream.
template <typename T>
std::pair<Matrix<T>, Matrix<T>> matmul_grads(MatSpan<T> a, MatSpan<T> b, MatSpan<T> upstream);

/// Row softmax over valid positions. Masking is realized as an additive
/// -1e9 on masked logits; rows are stabilized by subtracting the valid max.
/// Masked positions come out exactly 0; each row sums to 1 over valid ones.
/// Throws if a row has no valid position (degenerate session).
template <typename T>
Matrix<T> masked_row_softmax(MatSpan<T> logits, const MaskVector& mask);

/// Gradient of masked_row_softmax w.r.t. the logits:
/// row j: p .* (u - <u, p>) restricted to valid positions.
template <typename T>
Matrix<T> softmax_grad(MatSpan<T> probs, MatSpan<T> upstream, const MaskVector& mask);

/// Elementwise max(0, x).
template <typename T>
Matrix<T> relu(MatSpan<T> x);

/// upstream where x > 0, else 0 (gradient at exactly 0 is defined as 0).
template <typename T>
Matrix<T> relu_grad(MatSpan<T> x, MatSpan<T> upstream);

// In-place helpers for the graph's residuals and bias broadcasts.

template <typename T>
void add_inplace(Matrix<T>& dst, MatSpan<T> src);

template <typename T>
void scale_inplace(Matrix<T>& m, T factor);

/// dst(r, :) += row for every r; row is 1 x dst.cols().
template <typename T>
void add_row_broadcast(Matrix<T>& dst, MatSpan<T> row);

/// 1 x cols vector of column sums.
template <typename T>
Matrix<T> col_sums(MatSpan<T> m);

/// dst rows [first, first + src.rows) += src.
template <typename T>
void add_to_row_block(Matrix<T>& dst, std::size_t first, MatSpan<T> src);

// Matrix-argument conveniences (template deduction does not see through the
// MatSpan converting constructor).

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    return matmul(MatSpan<T>(a), MatSpan<T>(b));
}
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
    return matmul_nt(MatSpan<T>(a), MatSpan<T>(b));
}
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
    return matmul_tn(MatSpan<T>(a), MatSpan<T>(b));
}
template <typename T>
std::pair<Matrix<T>, Matrix<T>> matmul_grads(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>& upstream) {
    return matmul_grads(MatSpan<T>(a), MatSpan<T>(b), MatSpan<T>(upstream));
}
template <typename T>
Matrix<T> masked_row_softmax(const Matrix<T>& logits, const MaskVector& mask) {
    return masked_row_softmax(MatSpan<T>(logits), mask);
}
template <typename T>
Matrix<T> softmax_grad(const Matrix<T>& probs, const Matrix<T>& upstream, const MaskVector& mask) {
    return softmax_grad(MatSpan<T>(probs), MatSpan<T>(upstream), mask);
}
template <typename T>
Matrix<T> relu(const Matrix<T>& x) {
    return relu(MatSpan<T>(x));
}
template <typename T>
Matrix<T> relu_grad(const Matrix<T>& x, const Matrix<T>& upstream) {
    return relu_grad(MatSpan<T>(x), MatSpan<T>(upstream));
}
template <typename T>
void add_inplace(Matrix<T>& dst, const Matrix<T>& src) {
    add_inplace(dst, MatSpan<T>(src));
}
template <typename T>
void add_row_broadcast(Matrix<T>& dst, const Matrix<T>& row) {
    add_row_broadcast(dst, MatSpan<T>(row));
}
template <typename T>
Matrix<T> col_sums(const Matrix<T>& m) {
    return col_sums(MatSpan<T>(m));
}
template <typename T>
void add_to_row_block(Matrix<T>& dst, std::size_t first, const Matrix<T>& src) {
    add_to_row_block(dst, first, MatSpan<T>(src));
}

}  // namespace srsan
