#include "srsan/kernels.hpp"

#include <cmath>
#include <limits>

namespace srsan {

namespace {

constexpr double kMaskOffset = -1e9;

void require(bool ok, const std::string& what) {
    if (!ok) throw ContractViolation(what);
}

}  // namespace

template <typename T>
Matrix<T> matmul(MatSpan<T> a, MatSpan<T> b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ, a is " + a.shape_str() + ", b is " + b.shape_str());
    Matrix<T> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const T* arow = a.row(i);
        T* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            const T* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

template <typename T>
Matrix<T> matmul_nt(MatSpan<T> a, MatSpan<T> b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions differ, a is " + a.shape_str() + ", b^T is " +
                                  std::to_string(b.cols) + "x" + std::to_string(b.rows));
    Matrix<T> c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const T* arow = a.row(i);
        T* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const T* brow = b.row(j);
            T acc = T(0);
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

template <typename T>
Matrix<T> matmul_tn(MatSpan<T> a, MatSpan<T> b) {
    require(a.rows == b.rows, "matmul_tn: inner dimensions differ, a^T is " + std::to_string(a.cols) + "x" +
                                  std::to_string(a.rows) + ", b is " + b.shape_str());
    Matrix<T> c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const T* arow = a.row(k);
        const T* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const T aki = arow[i];
            if (aki == T(0)) continue;
            T* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

template <typename T>
std::pair<Matrix<T>, Matrix<T>> matmul_grads(MatSpan<T> a, MatSpan<T> b, MatSpan<T> upstream) {
    require(upstream.rows == a.rows && upstream.cols == b.cols,
            "matmul_grads: upstream is " + upstream.shape_str() + ", expected " + std::to_string(a.rows) + "x" +
                std::to_string(b.cols));
    require(a.cols == b.rows, "matmul_grads: inner dimensions differ, a is " + a.shape_str() + ", b is " + b.shape_str());
    return {matmul_nt(upstream, b), matmul_tn(a, upstream)};
}

template <typename T>
Matrix<T> masked_row_softmax(MatSpan<T> logits, const MaskVector& mask) {
    require(mask.len() == logits.cols,
            "masked_row_softmax: mask length " + std::to_string(mask.len()) + " != cols of " + logits.shape_str());
    require(mask.count_valid() > 0, "masked_row_softmax: all positions masked");
    Matrix<T> p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const T* in = logits.row(i);
        T* out = p.row(i);
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < logits.cols; ++j)
            if (mask.valid[j] && in[j] > mx) mx = in[j];
        T sum = T(0);
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const T shifted = in[j] + (mask.valid[j] ? T(0) : T(kMaskOffset)) - mx;
            const T e = std::exp(shifted);  // masked entries underflow to +0
            out[j] = e;
            if (mask.valid[j]) sum += e;
        }
        for (std::size_t j = 0; j < logits.cols; ++j) out[j] = mask.valid[j] ? out[j] / sum : T(0);
    }
    return p;
}

template <typename T>
Matrix<T> softmax_grad(MatSpan<T> probs, MatSpan<T> upstream, const MaskVector& mask) {
    require(mask.len() == probs.cols,
            "softmax_grad: mask length " + std::to_string(mask.len()) + " != cols of " + probs.shape_str());
    require(probs.rows == upstream.rows && probs.cols == upstream.cols,
            "softmax_grad: upstream is " + upstream.shape_str() + ", probs is " + probs.shape_str());
    Matrix<T> g(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const T* p = probs.row(i);
        const T* u = upstream.row(i);
        T* out = g.row(i);
        T dot = T(0);
        for (std::size_t j = 0; j < probs.cols; ++j)
            if (mask.valid[j]) dot += u[j] * p[j];
        for (std::size_t j = 0; j < probs.cols; ++j) out[j] = mask.valid[j] ? p[j] * (u[j] - dot) : T(0);
    }
    return g;
}

template <typename T>
Matrix<T> relu(MatSpan<T> x) {
    Matrix<T> y(x.rows, x.cols);
    const T* in = x.ptr;
    T* out = y.data();
    for (std::size_t i = 0; i < x.rows * x.cols; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
    return y;
}

template <typename T>
Matrix<T> relu_grad(MatSpan<T> x, MatSpan<T> upstream) {
    require(x.rows == upstream.rows && x.cols == upstream.cols,
            "relu_grad: upstream is " + upstream.shape_str() + ", x is " + x.shape_str());
    Matrix<T> g(x.rows, x.cols);
    const T* in = x.ptr;
    const T* u = upstream.ptr;
    T* out = g.data();
    for (std::size_t i = 0; i < x.rows * x.cols; ++i) out[i] = in[i] > T(0) ? u[i] : T(0);
    return g;
}

template <typename T>
void add_inplace(Matrix<T>& dst, MatSpan<T> src) {
    require(dst.rows() == src.rows && dst.cols() == src.cols,
            "add_inplace: src is " + src.shape_str() + ", dst is " + dst.shape_str());
    T* d = dst.data();
    for (std::size_t i = 0; i < src.rows * src.cols; ++i) d[i] += src.ptr[i];
}

template <typename T>
void scale_inplace(Matrix<T>& m, T factor) {
    T* d = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) d[i] *= factor;
}

template <typename T>
void add_row_broadcast(Matrix<T>& dst, MatSpan<T> row) {
    require(row.rows == 1 && row.cols == dst.cols(),
            "add_row_broadcast: row is " + row.shape_str() + ", dst is " + dst.shape_str());
    for (std::size_t i = 0; i < dst.rows(); ++i) {
        T* d = dst.row(i);
        for (std::size_t j = 0; j < dst.cols(); ++j) d[j] += row.ptr[j];
    }
}

template <typename T>
Matrix<T> col_sums(MatSpan<T> m) {
    Matrix<T> s(1, m.cols);
    T* out = s.data();
    for (std::size_t i = 0; i < m.rows; ++i) {
        const T* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
    }
    return s;
}

template <typename T>
void add_to_row_block(Matrix<T>& dst, std::size_t first, MatSpan<T> src) {
    require(first + src.rows <= dst.rows() && src.cols == dst.cols(),
            "add_to_row_block: src " + src.shape_str() + " at row " + std::to_string(first) + " into " +
                dst.shape_str());
    for (std::size_t i = 0; i < src.rows; ++i) {
        T* d = dst.row(first + i);
        const T* s = src.row(i);
        for (std::size_t j = 0; j < src.cols; ++j) d[j] += s[j];
    }
}

#define SRSAN_INSTANTIATE(T)                                                                              \
    template Matrix<T> matmul<T>(MatSpan<T>, MatSpan<T>);                                                 \
    template Matrix<T> matmul_nt<T>(MatSpan<T>, MatSpan<T>);                                              \
    template Matrix<T> matmul_tn<T>(MatSpan<T>, MatSpan<T>);                                              \
    template std::pair<Matrix<T>, Matrix<T>> matmul_grads<T>(MatSpan<T>, MatSpan<T>, MatSpan<T>);         \
    template Matrix<T> masked_row_softmax<T>(MatSpan<T>, const MaskVector&);                              \
    template Matrix<T> softmax_grad<T>(MatSpan<T>, MatSpan<T>, const MaskVector&);                        \
    template Matrix<T> relu<T>(MatSpan<T>);                                                               \
    template Matrix<T> relu_grad<T>(MatSpan<T>, MatSpan<T>);                                              \
    template void add_inplace<T>(Matrix<T>&, MatSpan<T>);                                                 \
    template void scale_inplace<T>(Matrix<T>&, T);                                                        \
    template void add_row_broadcast<T>(Matrix<T>&, MatSpan<T>);                                           \
    template Matrix<T> col_sums<T>(MatSpan<T>);                                                           \
    template void add_to_row_block<T>(Matrix<T>&, std::size_t, MatSpan<T>);

SRSAN_INSTANTIATE(float)
SRSAN_INSTANTIATE(double)

#undef SRSAN_INSTANTIATE

}  // namespace srsan
