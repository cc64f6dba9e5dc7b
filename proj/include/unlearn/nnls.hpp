#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "unlearn/common.hpp"
#include "unlearn/linalg.hpp"

namespace unlearn {

struct NnlsResult {
    Vec lambda;
    std::size_t iterations = 0;
    double projected_gradient = 0.0;   // max over inactive coordinates at exit
};

namespace detail {

// Cholesky solve of G_PP z = c_P for the passive set P. Returns false when
// the submatrix is not numerically positive definite.
inline bool solve_passive(const Matrix& G, const Vec& c, const std::vector<std::size_t>& P,
                          double ridge, Vec& z) {
    const std::size_t k = P.size();
    Matrix L(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j <= i; ++j) L.at(i, j) = G.at(P[i], P[j]);
    for (std::size_t i = 0; i < k; ++i) L.at(i, i) += ridge;

    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = L.at(i, j);
            for (std::size_t t = 0; t < j; ++t) s -= L.at(i, t) * L.at(j, t);
            if (i == j) {
                if (s <= 0.0) return false;
                L.at(i, i) = std::sqrt(s);
            } else {
                L.at(i, j) = s / L.at(j, j);
            }
        }
    }
    z.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        double s = c[P[i]];
        for (std::size_t t = 0; t < i; ++t) s -= L.at(i, t) * z[t];
        z[i] = s / L.at(i, i);
    }
    for (std::size_t ii = k; ii-- > 0;) {
        double s = z[ii];
        for (std::size_t t = ii + 1; t < k; ++t) s -= L.at(t, ii) * z[t];
        z[ii] = s / L.at(ii, ii);
    }
    return true;
}

}  // namespace detail

// Lawson-Hanson active-set NNLS on the normal equations: minimizes
// ‖theta - A lambda‖ over lambda >= 0 given G = A^T A and c = A^T theta.
// allowed[i] == 0 pins lambda_i to zero (used by the margin-thresholded
// extraction mode). Ties in the entering coordinate go to the lowest index
// so certificates are deterministic.
inline NnlsResult nnls_gram(const Matrix& G, const Vec& c,
                            const std::vector<char>* allowed = nullptr,
                            double tol = 1e-10, std::size_t max_iterations = 0) {
    const std::size_t m = c.size();
    if (G.rows != m || G.cols != m) throw ValidationError("nnls_gram: Gram size mismatch");
    if (max_iterations == 0) max_iterations = 100 * m + 1000;

    double cmax = 0.0;
    for (double v : c) cmax = std::max(cmax, std::abs(v));
    const double grad_tol = tol * std::max(1.0, cmax);
    double ridge = 0.0;

    NnlsResult res;
    res.lambda.assign(m, 0.0);
    std::vector<char> passive(m, 0);
    std::vector<std::size_t> P;
    Vec grad(m), z;

    std::size_t iter = 0;
    while (true) {
        // gradient of -0.5 residual^2: c - G lambda
        for (std::size_t i = 0; i < m; ++i) {
            double s = c[i];
            for (std::size_t j = 0; j < m; ++j) s -= G.at(i, j) * res.lambda[j];
            grad[i] = s;
        }
        double wmax = 0.0;
        std::size_t enter = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (passive[i]) continue;
            if (allowed != nullptr && (*allowed)[i] == 0) continue;
            if (grad[i] > wmax) {   // strict > keeps the lowest index on ties
                wmax = grad[i];
                enter = i;
            }
        }
        res.projected_gradient = wmax;
        if (enter == m || wmax <= grad_tol) break;

        passive[enter] = 1;
        P.push_back(enter);

        while (true) {
            if (++iter > max_iterations)
                throw SolverError("nnls: no convergence after " + std::to_string(iter) +
                                  " iterations, projected gradient " + std::to_string(wmax));
            if (!detail::solve_passive(G, c, P, ridge, z)) {
                // rank-deficient passive set (e.g. duplicated points): retry
                // with a tiny ridge proportional to the Gram scale
                double tr = 0.0;
                for (std::size_t i = 0; i < m; ++i) tr += G.at(i, i);
                ridge = std::max(ridge * 10.0, 1e-12 * std::max(tr, 1.0));
                continue;
            }
            bool all_pos = true;
            for (double v : z)
                if (v <= 0.0) { all_pos = false; break; }
            if (all_pos) {
                for (std::size_t t = 0; t < P.size(); ++t) res.lambda[P[t]] = z[t];
                break;
            }
            // step toward z until the first coordinate hits zero
            double alpha = 2.0;
            std::size_t blocking = P.size();
            for (std::size_t t = 0; t < P.size(); ++t) {
                if (z[t] <= 0.0) {
                    const double lt = res.lambda[P[t]];
                    const double step = lt / (lt - z[t]);
                    if (step < alpha) {
                        alpha = step;
                        blocking = t;
                    }
                }
            }
            if (alpha > 1.0) alpha = 1.0;
            for (std::size_t t = 0; t < P.size(); ++t) {
                const std::size_t i = P[t];
                res.lambda[i] += alpha * (z[t] - res.lambda[i]);
            }
            if (blocking < P.size()) res.lambda[P[blocking]] = 0.0;
            std::vector<std::size_t> keep;
            for (std::size_t t = 0; t < P.size(); ++t) {
                const std::size_t i = P[t];
                if (t == blocking || res.lambda[i] <= 0.0) {
                    res.lambda[i] = 0.0;
                    passive[i] = 0;
                } else {
                    keep.push_back(i);
                }
            }
            P = std::move(keep);
        }
    }
    res.iterations = iter;
    return res;
}

}  // namespace unlearn
