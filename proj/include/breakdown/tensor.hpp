#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace breakdown {

/// Dense row-major matrix. Vectors are 1xN or Nx1 as convenient.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), T(0)) {}

    T* row(int r) { return a.data() + static_cast<size_t>(r) * static_cast<size_t>(cols); }
    const T* row(int r) const {
        return a.data() + static_cast<size_t>(r) * static_cast<size_t>(cols);
    }
    T& at(int r, int c) { return a[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    T at(int r, int c) const {
        return a[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)];
    }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), T(0)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B  (A: m x k, B: k x n). The k-inner / n-innermost loop order keeps
// the hot loop contiguous for autovectorization.
template <typename T>
void matmul(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    C.zero();
    const int m = A.rows, k = A.cols, n = B.cols;
    for (int i = 0; i < m; ++i) {
        const T* arow = A.row(i);
        T* crow = C.row(i);
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = B.row(p);
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C = A * B^T  (A: m x k, B: n x k).
template <typename T>
void matmul_nt(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
    assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
    const int m = A.rows, k = A.cols, n = B.rows;
    for (int i = 0; i < m; ++i) {
        const T* arow = A.row(i);
        T* crow = C.row(i);
        for (int j = 0; j < n; ++j) {
            const T* brow = B.row(j);
            T sum = T(0);
            for (int p = 0; p < k; ++p) sum += arow[p] * brow[p];
            crow[j] = sum;
        }
    }
}

// C += A^T * B  (A: k x m, B: k x n). Accumulating form for weight gradients.
template <typename T>
void matmul_tn_acc(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    const int k = A.rows, m = A.cols, n = B.cols;
    for (int p = 0; p < k; ++p) {
        const T* arow = A.row(p);
        const T* brow = B.row(p);
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = C.row(i);
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void add_row_inplace(Mat<T>& X, const Mat<T>& bias) {
    assert(bias.rows == 1 && bias.cols == X.cols);
    for (int i = 0; i < X.rows; ++i) {
        T* r = X.row(i);
        for (int j = 0; j < X.cols; ++j) r[j] += bias.a[static_cast<size_t>(j)];
    }
}

// Numerically stable in-place softmax of one row segment.
template <typename T>
void softmax_inplace(T* x, int n) {
    T mx = x[0];
    for (int i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
    T sum = T(0);
    for (int i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    const T inv = T(1) / sum;
    for (int i = 0; i < n; ++i) x[i] *= inv;
}

// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865476)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865476)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return cdf + x * pdf;
}

template <typename T>
T log_sum_exp(const T* x, int n) {
    T mx = x[0];
    for (int i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
    T sum = T(0);
    for (int i = 0; i < n; ++i) sum += std::exp(x[i] - mx);
    return mx + std::log(sum);
}

}  // namespace breakdown
