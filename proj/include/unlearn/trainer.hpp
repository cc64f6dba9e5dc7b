#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/common.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/model.hpp"

namespace unlearn {

enum class Loss { Logistic, Exponential };

inline std::string to_string(Loss l) {
    return l == Loss::Logistic ? "logistic" : "exponential";
}

inline Loss loss_from_string(const std::string& s) {
    if (s == "logistic") return Loss::Logistic;
    if (s == "exponential") return Loss::Exponential;
    throw ParseError("unknown loss '" + s + "'");
}

inline double loss_value(Loss l, double q) {
    if (l == Loss::Exponential) return std::exp(-q);
    // log(1 + e^-q), overflow-safe on both tails
    return q >= 0.0 ? std::log1p(std::exp(-q)) : -q + std::log1p(std::exp(q));
}

// l'(q); logistic -1/(1+e^q), exponential -e^-q. Strictly negative.
inline double loss_derivative(Loss l, double q) {
    if (l == Loss::Exponential) return -std::exp(-q);
    if (q >= 0.0) {
        const double t = std::exp(-q);
        return -t / (1.0 + t);
    }
    return -1.0 / (1.0 + std::exp(q));
}

inline double empirical_loss(const ModelParams& p, const Dataset& ds, Loss l) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.m(); ++i) s += loss_value(l, margin(p, ds, i));
    return s / static_cast<double>(ds.m());
}

struct TrainConfig {
    Loss loss = Loss::Logistic;
    double lr = 0.1;
    std::size_t epochs = 1000;
    double weight_decay = 0.0;
    double loss_threshold = 0.0;   // stop early once L < threshold
    std::uint64_t seed = 0;
};

struct TrainReport {
    double final_loss = 0.0;
    std::size_t epochs_run = 0;
    double min_margin = 0.0;
    std::vector<double> loss_curve;   // downsampled, final value appended
};

// Full-batch gradient descent on the empirical loss, coupled weight decay,
// deterministic epoch loop. Stops early once the loss drops below
// cfg.loss_threshold; throws DivergenceError when the loss stops being finite.
inline std::pair<ModelParams, TrainReport> train_gd(const ModelParams& start, const Dataset& ds,
                                                    const TrainConfig& cfg) {
    if (cfg.lr < 0.0) throw ValidationError("train_gd: lr must be >= 0");
    if (cfg.weight_decay < 0.0) throw ValidationError("train_gd: weight_decay must be >= 0");
    detail::check_input_dim(start, ds.d());

    ModelParams p = start;
    TrainReport rep;
    const std::size_t m = ds.m(), d = ds.d();
    const double inv_m = 1.0 / static_cast<double>(m);
    const std::size_t stride = std::max<std::size_t>(1, cfg.epochs / 256);

    Vec q(m), coef(m);
    Matrix Z;   // pre-activations z_ji = <w_j, x_i>, reused by the update
    if (p.kind == ModelKind::TwoLayer) Z = Matrix(p.n, m);

    std::size_t epoch = 0;
    for (; epoch < cfg.epochs; ++epoch) {
        double L = 0.0;
        double min_margin = 0.0;
        if (p.kind == ModelKind::Linear) {
            for (std::size_t i = 0; i < m; ++i)
                q[i] = ds.y[i] * dot(p.theta.data(), ds.X.row(i), d);
        } else {
            for (std::size_t i = 0; i < m; ++i) q[i] = 0.0;
            for (std::size_t j = 0; j < p.n; ++j) {
                const double* wj = p.neuron(j);
                double* zj = Z.row(j);
                for (std::size_t i = 0; i < m; ++i) {
                    const double z = dot(wj, ds.X.row(i), d);
                    zj[i] = z;
                    if (z > 0.0) q[i] += ds.y[i] * p.u[j] * z;
                }
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            L += loss_value(cfg.loss, q[i]);
            min_margin = i == 0 ? q[i] : std::min(min_margin, q[i]);
        }
        L *= inv_m;
        if (!std::isfinite(L))
            throw DivergenceError("train_gd: loss became non-finite at epoch " +
                                  std::to_string(epoch));
        rep.final_loss = L;
        rep.min_margin = min_margin;
        if (epoch % stride == 0) rep.loss_curve.push_back(L);
        if (cfg.loss_threshold > 0.0 && L < cfg.loss_threshold) break;

        for (std::size_t i = 0; i < m; ++i)
            coef[i] = inv_m * loss_derivative(cfg.loss, q[i]) * ds.y[i];

        const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
        if (p.kind == ModelKind::Linear) {
            if (cfg.weight_decay != 0.0) scale_inplace(p.theta, shrink);
            for (std::size_t i = 0; i < m; ++i)
                axpy(-cfg.lr * coef[i], ds.X.row(i), p.theta.data(), d);
        } else {
            for (std::size_t j = 0; j < p.n; ++j) {
                double* wj = p.neuron(j);
                const double* zj = Z.row(j);
                if (cfg.weight_decay != 0.0)
                    for (std::size_t k = 0; k < d; ++k) wj[k] *= shrink;
                for (std::size_t i = 0; i < m; ++i)
                    if (zj[i] >= 0.0)
                        axpy(-cfg.lr * coef[i] * p.u[j], ds.X.row(i), wj, d);
            }
        }
    }
    rep.epochs_run = epoch;
    if (epoch == cfg.epochs) {
        // report the loss of the final iterate
        rep.final_loss = empirical_loss(p, ds, cfg.loss);
        double mm = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double qi = margin(p, ds, i);
            mm = i == 0 ? qi : std::min(mm, qi);
        }
        rep.min_margin = mm;
    }
    rep.loss_curve.push_back(rep.final_loss);
    return {std::move(p), rep};
}

// Hard-margin max-margin linear predictor by coordinate ascent on the dual
//   max sum_i lambda_i - 0.5 ‖sum_i lambda_i y_i x_i‖^2,  lambda >= 0,
// well-conditioned for near-orthogonal data. Returns w with
// min_i y_i <w, x_i> = 1 to within kkt_tol.
inline Vec train_maxmargin_linear(const Dataset& ds, double kkt_tol = 1e-8,
                                  std::size_t max_sweeps = 200000) {
    const std::size_t m = ds.m(), d = ds.d();
    Matrix K(m, m);   // K_ij = y_i y_j <x_i, x_j>
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = ds.y[i] * ds.y[j] * dot(ds.X.row(i), ds.X.row(j), d);
            K.at(i, j) = v;
            K.at(j, i) = v;
        }
    for (std::size_t i = 0; i < m; ++i)
        if (K.at(i, i) <= 0.0)
            throw OracleError("train_maxmargin_linear: zero sample vector, problem infeasible");

    Vec lambda(m, 0.0), t(m, 0.0);   // t_i = y_i <w, x_i>
    double residual = 0.0;
    std::size_t sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < m; ++i) {
            const double target = lambda[i] + (1.0 - t[i]) / K.at(i, i);
            const double next = target > 0.0 ? target : 0.0;
            const double delta = next - lambda[i];
            if (delta != 0.0) {
                for (std::size_t k = 0; k < m; ++k) t[k] += delta * K.at(i, k);
                lambda[i] = next;
            }
        }
        residual = 0.0;
        double lam_max = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            lam_max = std::max(lam_max, lambda[i]);
            const double viol = lambda[i] > 0.0 ? std::abs(1.0 - t[i])
                                                : std::max(0.0, 1.0 - t[i]);
            residual = std::max(residual, viol);
        }
        if (lam_max > 1e8)
            throw OracleError(
                "train_maxmargin_linear: multipliers diverging after " +
                std::to_string(sweep + 1) + " sweeps; data likely not separable");
        if (residual < kkt_tol) break;
    }
    if (residual >= kkt_tol)
        throw OracleError("train_maxmargin_linear: no convergence after " +
                          std::to_string(max_sweeps) + " sweeps, KKT residual " +
                          std::to_string(residual));
    Vec w(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) axpy(lambda[i] * ds.y[i], ds.X.row(i), w.data(), d);
    return w;
}

}  // namespace unlearn
