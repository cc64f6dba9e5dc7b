#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "unlearn/common.hpp"

namespace unlearn {

using Vec = std::vector<double>;

// Dense row-major matrix. All kernels below iterate in a fixed order so
// results are bit-reproducible across runs of the same binary.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double dot(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw ValidationError("dot: size mismatch");
    return dot(x.data(), y.data(), x.size());
}

inline double norm2_sq(const double* x, std::size_t n) { return dot(x, x, n); }

inline double norm2(const Vec& x) { return std::sqrt(norm2_sq(x.data(), x.size())); }

// y += a * x
inline void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void scale_inplace(Vec& x, double c) {
    for (double& v : x) v *= c;
}

inline double max_abs_diff(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw ValidationError("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

// sign with the tie rule sign(0) = +1, matching the activation convention.
inline double sign_pos(double x) { return x >= 0.0 ? 1.0 : -1.0; }

}  // namespace unlearn
