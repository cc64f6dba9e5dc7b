#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/common.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/model.hpp"
#include "unlearn/nnls.hpp"

namespace unlearn {

enum class MultiplierMode { PlainNnls, MarginThresholded };

inline std::string to_string(MultiplierMode m) {
    return m == MultiplierMode::PlainNnls ? "plain" : "thresholded";
}

inline MultiplierMode multiplier_mode_from_string(const std::string& s) {
    if (s == "plain") return MultiplierMode::PlainNnls;
    if (s == "thresholded") return MultiplierMode::MarginThresholded;
    throw ParseError("unknown multiplier mode '" + s + "'");
}

// Measures how well params satisfy the margin-maximization first-order
// conditions on a dataset:
//   eps   = ‖theta - sum_i lambda_i y_i grad N(x_i, theta)‖
//   delta = max_i lambda_i (margin_i - 1)
//   gamma = max(0, 1 - min_i margin_i)
struct KktCertificate {
    Vec lambda;
    double eps = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
    Vec margins;
    MultiplierMode mode = MultiplierMode::PlainNnls;
    double kappa = 0.1;
};

namespace detail {

// Gram of the signed gradient dictionary {y_i grad N(x_i, theta)} and its
// inner products with theta. For both model kinds c_i equals the margin.
inline void gradient_gram(const ModelParams& p, const Dataset& ds, Matrix& G, Vec& c) {
    const std::size_t m = ds.m(), d = ds.d();
    G = Matrix(m, m);
    c = margins(p, ds);
    if (p.kind == ModelKind::Linear) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v =
                    ds.y[i] * ds.y[j] * dot(ds.X.row(i), ds.X.row(j), d);
                G.at(i, j) = v;
                G.at(j, i) = v;
            }
        return;
    }
    const ActivationMap act = activation_map(p, ds);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < p.n; ++q)
                if (act.active(i, q) && act.active(j, q)) s += p.u[q] * p.u[q];
            const double v =
                ds.y[i] * ds.y[j] * dot(ds.X.row(i), ds.X.row(j), d) * s;
            G.at(i, j) = v;
            G.at(j, i) = v;
        }
}

// Exact stationarity residual, accumulated block by block in theta space to
// avoid the cancellation a Gram-based formula would suffer near eps = 0.
inline double stationarity_residual(const ModelParams& p, const Dataset& ds, const Vec& lambda) {
    const std::size_t m = ds.m(), d = ds.d();
    double acc = 0.0;
    if (p.kind == ModelKind::Linear) {
        Vec r(p.theta);
        for (std::size_t i = 0; i < m; ++i)
            axpy(-lambda[i] * ds.y[i], ds.X.row(i), r.data(), d);
        return norm2(r);
    }
    const ActivationMap act = activation_map(p, ds);
    Vec r(d);
    for (std::size_t j = 0; j < p.n; ++j) {
        const double* wj = p.neuron(j);
        for (std::size_t k = 0; k < d; ++k) r[k] = wj[k];
        for (std::size_t i = 0; i < m; ++i)
            if (act.active(i, j)) axpy(-lambda[i] * ds.y[i] * p.u[j], ds.X.row(i), r.data(), d);
        acc += norm2_sq(r.data(), d);
    }
    return std::sqrt(acc);
}

}  // namespace detail

// lambda = argmin_{lambda >= 0} ‖theta - sum_i lambda_i y_i grad N(x_i)‖ via
// active-set NNLS. MarginThresholded first pins points with margin > 1+kappa
// to zero and solves on the rest.
inline Vec extract_multipliers(const ModelParams& p, const Dataset& ds,
                               MultiplierMode mode = MultiplierMode::PlainNnls,
                               double kappa = 0.1) {
    Matrix G;
    Vec c;
    detail::gradient_gram(p, ds, G, c);
    std::vector<char> allowed(ds.m(), 1);
    if (mode == MultiplierMode::MarginThresholded)
        for (std::size_t i = 0; i < ds.m(); ++i)
            if (c[i] > 1.0 + kappa) allowed[i] = 0;
    return nnls_gram(G, c, &allowed).lambda;
}

inline KktCertificate certify(const ModelParams& p, const Dataset& ds,
                              const std::optional<Vec>& lambda = std::nullopt,
                              MultiplierMode mode = MultiplierMode::PlainNnls,
                              double kappa = 0.1) {
    KktCertificate cert;
    cert.mode = mode;
    cert.kappa = kappa;
    if (lambda.has_value()) {
        if (lambda->size() != ds.m())
            throw ValidationError("certify: lambda length must equal m");
        for (double v : *lambda)
            if (v < 0.0) throw ValidationError("certify: provided lambda has a negative entry");
        cert.lambda = *lambda;
    } else {
        cert.lambda = extract_multipliers(p, ds, mode, kappa);
    }
    cert.margins = margins(p, ds);
    cert.eps = detail::stationarity_residual(p, ds, cert.lambda);
    cert.delta = 0.0;
    double min_margin = cert.margins.empty() ? 1.0 : cert.margins[0];
    for (std::size_t i = 0; i < ds.m(); ++i) {
        cert.delta = std::max(cert.delta, cert.lambda[i] * (cert.margins[i] - 1.0));
        min_margin = std::min(min_margin, cert.margins[i]);
    }
    cert.gamma = std::max(0.0, 1.0 - min_margin);
    return cert;
}

// Margin repair for 1-homogeneous models: scaling by 1/(1-gamma) restores
// primal feasibility and changes the certificate to
//   eps'   = eps / (1-gamma)
//   delta' = max_p lambda_p * gamma/(1-gamma) + delta/(1-gamma)
// with multipliers lambda' = lambda / (1-gamma).
struct RescaleOutcome {
    ModelParams params;
    KktCertificate predicted;
    double factor = 1.0;
};

inline RescaleOutcome rescale(const ModelParams& p, const KktCertificate& cert) {
    if (cert.gamma >= 1.0)
        throw ValidationError("rescale: gamma >= 1, margin repair infeasible");
    RescaleOutcome out;
    if (cert.gamma == 0.0) {
        out.params = p;
        out.predicted = cert;
        out.factor = 1.0;
        return out;
    }
    const double C = 1.0 / (1.0 - cert.gamma);
    out.factor = C;
    out.params = scale(p, C);
    out.predicted = cert;
    out.predicted.eps = cert.eps * C;
    double lam_max = 0.0;
    for (double v : cert.lambda) lam_max = std::max(lam_max, v);
    out.predicted.delta = lam_max * cert.gamma * C + cert.delta * C;
    out.predicted.gamma = 0.0;
    for (double& v : out.predicted.lambda) v *= C;
    for (double& v : out.predicted.margins) v *= C;
    return out;
}

// Measured counterpart of the rescale prediction, with the scaling
// argument's accounting: gamma from the scaled margins, stationarity against
// the scaled multipliers C*lambda, slackness against the original lambda.
// (The scaled multipliers would inflate the slack by another factor C, which
// the predicted delta' does not cover.)
struct RescaleCheck {
    double gamma = 0.0;
    double eps = 0.0;
    double delta = 0.0;
};

inline RescaleCheck rescale_check(const ModelParams& scaled_params, const Dataset& ds,
                                  const KktCertificate& original) {
    if (original.gamma >= 1.0) throw ValidationError("rescale_check: gamma >= 1");
    const double C = 1.0 / (1.0 - original.gamma);
    RescaleCheck out;
    Vec scaled_lambda = original.lambda;
    for (double& v : scaled_lambda) v *= C;
    out.eps = detail::stationarity_residual(scaled_params, ds, scaled_lambda);
    const Vec mg = margins(scaled_params, ds);
    double min_margin = mg.empty() ? 1.0 : mg[0];
    for (std::size_t i = 0; i < mg.size(); ++i) {
        out.delta = std::max(out.delta, original.lambda[i] * (mg[i] - 1.0));
        min_margin = std::min(min_margin, mg[i]);
    }
    out.gamma = std::max(0.0, 1.0 - min_margin);
    return out;
}

// Diagnostic comparison of recovered multipliers against the linear /
// two-layer multiplier bounds, using the audited data constants and the
// measured certificate quality (eps1, delta1) of the model being checked.
struct BoundsEntry {
    double lambda = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = true;
};

struct BoundsReport {
    bool applicable = false;
    std::string reason;
    double upper = 0.0;           // global cap: 2.4 (linear) or 20.4 n (two-layer)
    std::vector<BoundsEntry> entries;
    std::size_t violations = 0;
};

inline BoundsReport multiplier_bounds_report(const KktCertificate& cert,
                                             const AssumptionReport& report, ModelKind kind,
                                             std::size_t n, double eps1, double delta1) {
    BoundsReport out;
    const double m = static_cast<double>(report.m);
    if (report.psi > 0.1) {
        out.reason = "psi > 0.1";
        return out;
    }
    if (kind == ModelKind::Linear) {
        const double eps_d = report.eps_d_linear();
        if (eps_d > 0.5 || eps1 > 0.5 || delta1 > 0.5) {
            out.reason = "bounds need eps_d, eps1, delta1 <= 0.5";
            return out;
        }
        if (report.phi > eps_d / (4.0 * m)) {
            out.reason = "phi > eps_d / (4m)";
            return out;
        }
        out.applicable = true;
        out.upper = 2.4;
        // ‖x_t‖^2 in [1-psi, 1+psi] gives the conservative per-point interval
        const double lo = (1.0 - 0.6 * eps_d - 1.1 * eps1) / (1.0 + report.psi);
        const double hi =
            (1.0 + 1.2 * eps_d + 2.15 * eps1 + 2.2 * delta1) / (1.0 - report.psi);
        for (double lam : cert.lambda) {
            BoundsEntry e{lam, lo, hi, lam <= out.upper && lam >= lo && lam <= hi};
            if (!e.pass) ++out.violations;
            out.entries.push_back(e);
        }
        return out;
    }
    if (n == 0) {
        out.reason = "two-layer bounds need the neuron count";
        return out;
    }
    const double eps_d = report.eps_d_twolayer(n);
    if (eps_d > 1.0 || eps1 > 1.0 || delta1 > 1.0) {
        out.reason = "bounds need eps_d, eps1, delta1 <= 1";
        return out;
    }
    if (report.phi > eps_d / (4.0 * m * static_cast<double>(n))) {
        out.reason = "phi > eps_d / (4mn)";
        return out;
    }
    out.applicable = true;
    out.upper = 20.4 * static_cast<double>(n);
    const double lo = 0.9 - 4.64 * eps_d / static_cast<double>(n) - 1.92 * eps1;
    for (double lam : cert.lambda) {
        BoundsEntry e{lam, lo, out.upper, lam >= lo && lam <= out.upper};
        if (!e.pass) ++out.violations;
        out.entries.push_back(e);
    }
    return out;
}

}  // namespace unlearn
