#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace clicotea {

/// Dense row-major matrix. A row count of 1 doubles as a vector.
template <typename Scalar>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Scalar> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, Scalar fill = Scalar(0)) : rows(r), cols(c), data(r * c, fill) {}

    Scalar& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const Scalar& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    Scalar* row(std::size_t r) { return data.data() + r * cols; }
    const Scalar* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void fill(Scalar v) { std::fill(data.begin(), data.end(), v); }
};

// C = A * B (or C += with accumulate). A: m x k, B: k x n.
template <typename Scalar>
void gemm_nn(const Mat<Scalar>& A, const Mat<Scalar>& B, Mat<Scalar>& C, bool accumulate = false) {
    if (A.cols != B.rows) throw std::invalid_argument("gemm_nn: inner dimensions differ");
    if (!accumulate) C = Mat<Scalar>(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
        Scalar* ci = C.row(i);
        const Scalar* ai = A.row(i);
        for (std::size_t p = 0; p < A.cols; ++p) {
            const Scalar a = ai[p];
            const Scalar* bp = B.row(p);
            for (std::size_t j = 0; j < B.cols; ++j) ci[j] += a * bp[j];
        }
    }
}

// C = A * B^T. A: m x k, B: n x k.
template <typename Scalar>
void gemm_nt(const Mat<Scalar>& A, const Mat<Scalar>& B, Mat<Scalar>& C, bool accumulate = false) {
    if (A.cols != B.cols) throw std::invalid_argument("gemm_nt: inner dimensions differ");
    if (!accumulate) C = Mat<Scalar>(A.rows, B.rows);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const Scalar* ai = A.row(i);
        Scalar* ci = C.row(i);
        for (std::size_t j = 0; j < B.rows; ++j) {
            const Scalar* bj = B.row(j);
            Scalar acc = Scalar(0);
            for (std::size_t p = 0; p < A.cols; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C = A^T * B. A: k x m, B: k x n.
template <typename Scalar>
void gemm_tn(const Mat<Scalar>& A, const Mat<Scalar>& B, Mat<Scalar>& C, bool accumulate = false) {
    if (A.rows != B.rows) throw std::invalid_argument("gemm_tn: inner dimensions differ");
    if (!accumulate) C = Mat<Scalar>(A.cols, B.cols);
    for (std::size_t p = 0; p < A.rows; ++p) {
        const Scalar* ap = A.row(p);
        const Scalar* bp = B.row(p);
        for (std::size_t i = 0; i < A.cols; ++i) {
            Scalar* ci = C.row(i);
            const Scalar a = ap[i];
            for (std::size_t j = 0; j < B.cols; ++j) ci[j] += a * bp[j];
        }
    }
}

template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, std::size_t n) {
    Scalar acc = Scalar(0);
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename Scalar>
Scalar norm(const Scalar* a, std::size_t n) {
    return std::sqrt(dot(a, a, n));
}

/// Cosine similarity; zero vectors compare as 0.
template <typename Scalar>
double cosine(const Scalar* a, const Scalar* b, std::size_t n) {
    const double na = static_cast<double>(norm(a, n));
    const double nb = static_cast<double>(norm(b, n));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return static_cast<double>(dot(a, b, n)) / (na * nb);
}

template <typename Scalar>
bool all_finite(const Mat<Scalar>& m) {
    for (const Scalar v : m.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

}  // namespace clicotea
