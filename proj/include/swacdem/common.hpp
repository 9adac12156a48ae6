#pragma once

// Shared plumbing: error types, seeded RNG derivation, a small row-major
// matrix type and the dense kernels the training loops run on.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace swacdem {

// Exit-code mapping used by the CLI: config_error -> 2, numeric_error -> 3,
// io_error -> 4.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64, used to derive independent sub-stream seeds from one master
// seed. Derivation is pure, so partitioned work stays deterministic.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index));
}

using Rng = std::mt19937_64;

// Row-major dense matrix of doubles. Deliberately minimal: the hot loops
// below want contiguous rows, nothing more.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return a.size(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C = A * B^T, A: m x k, B: n x k. Row-row dot products keep both operands
// contiguous.
inline Mat matmul_nt(const Mat& A, const Mat& B) {
    if (A.cols != B.cols) throw config_error("matmul_nt: inner dimensions differ");
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int j = 0; j < B.rows; ++j) ci[j] = dot(ai, B.row(j), A.cols);
    }
    return C;
}

// C = A * B, A: m x k, B: k x n. i-k-j order, axpy over rows of B.
inline Mat matmul_nn(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw config_error("matmul_nn: inner dimensions differ");
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        double* ci = C.row(i);
        const double* ai = A.row(i);
        for (int k = 0; k < A.cols; ++k) axpy(ai[k], B.row(k), ci, B.cols);
    }
    return C;
}

// C += A^T * B, A: n x m, B: n x k, C: m x k. Accumulation form used for
// weight-gradient sums over a batch.
inline void add_at_b(const Mat& A, const Mat& B, Mat& C, double scale = 1.0) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw config_error("add_at_b: dimension mismatch");
    for (int n = 0; n < A.rows; ++n) {
        const double* an = A.row(n);
        const double* bn = B.row(n);
        for (int i = 0; i < A.cols; ++i) axpy(scale * an[i], bn, C.row(i), C.cols);
    }
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline double logsumexp(const std::vector<double>& xs) {
    if (xs.empty()) throw config_error("logsumexp: empty input");
    double m = xs[0];
    for (double x : xs)
        if (x > m) m = x;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline bool all_finite(const std::vector<double>& xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Mat& m) { return all_finite(m.a); }

// FNV-1a over raw bytes; used to fingerprint the training split so model
// artifacts can record which data produced their normalization stats.
inline std::uint64_t fnv1a64(const void* data, size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace swacdem
