#pragma once

#include <cmath>
#include <cstddef>
#include <cassert>
#include <vector>

namespace tricl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. All numerics in this project are 64-bit.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), a(std::move(data)) {
        assert(a.size() == static_cast<size_t>(r) * c);
    }

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    double* row_ptr(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    bool empty() const { return a.empty(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    Vec row_vec(int r) const { return Vec(row_ptr(r), row_ptr(r) + cols); }

    bool all_finite() const {
        for (double x : a)
            if (!std::isfinite(x)) return false;
        return true;
    }

    static Mat zeros_like(const Mat& o) { return Mat(o.rows, o.cols); }
    static Mat from_row(const Vec& v) { return Mat(1, static_cast<int>(v.size()), v); }
};

// out += A * B
inline void matmul_nn_acc(const Mat& A, const Mat& B, Mat& out) {
    assert(A.cols == B.rows && out.rows == A.rows && out.cols == B.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = B.row_ptr(k);
            for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

inline Mat matmul_nn(const Mat& A, const Mat& B) {
    Mat out(A.rows, B.cols);
    matmul_nn_acc(A, B, out);
    return out;
}

// out += A * B^T
inline void matmul_nt_acc(const Mat& A, const Mat& B, Mat& out) {
    assert(A.cols == B.cols && out.rows == A.rows && out.cols == B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = B.row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            orow[j] += s;
        }
    }
}

inline Mat matmul_nt(const Mat& A, const Mat& B) {
    Mat out(A.rows, B.rows);
    matmul_nt_acc(A, B, out);
    return out;
}

// out += A^T * B
inline void matmul_tn_acc(const Mat& A, const Mat& B, Mat& out) {
    assert(A.rows == B.rows && out.rows == A.cols && out.cols == B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* arow = A.row_ptr(k);
        const double* brow = B.row_ptr(k);
        for (int i = 0; i < A.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row_ptr(i);
            for (int j = 0; j < B.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

} // namespace tricl
