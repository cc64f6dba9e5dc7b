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
#include "unlearn/trainer.hpp"

namespace unlearn {

struct UnlearnResult {
    std::vector<std::size_t> forget;
    Vec beta;                                 // per forgotten point, same order
    Vec lambda_forget;                        // multipliers used, same order
    ModelParams theta_hat;                    // raw post-step parameters
    std::optional<ModelParams> theta_tilde;   // corrected witness, two-layer only
    double c = 0.0;                           // correction scale eps_d / (2mn)
    double rescale_factor = 1.0;
};

// beta = -lambda_l / l'(y_l N(x_l, theta)); zero multiplier means no step.
inline double step_size(const ModelParams& p, const Dataset& ds, std::size_t l, double lambda_l,
                        Loss loss) {
    if (l >= ds.m()) throw ValidationError("step_size: index out of range");
    if (lambda_l < 0.0) throw ValidationError("step_size: lambda must be >= 0");
    if (lambda_l == 0.0) return 0.0;
    const double lp = loss_derivative(loss, margin(p, ds, l));
    if (lp == 0.0 || !std::isfinite(lp))
        throw SolverError("step_size: loss derivative left the double range at margin " +
                          std::to_string(margin(p, ds, l)));
    return -lambda_l / lp;
}

// One loss-ascent step per forgotten point, all gradients taken at the
// original parameters:
//   theta_hat = theta + sum_r beta_r grad l(y_r N(x_r, theta)).
// With beta_r = -lambda_r / l'(margin_r) the chain rule cancels and the step
// equals subtracting the multiplier-weighted margin gradients; the identity
// is re-checked numerically to 1e-12 relative.
inline UnlearnResult unlearn_kga(const ModelParams& p, const Dataset& ds,
                                 const std::vector<std::size_t>& forget, const Vec& lambda,
                                 Loss loss) {
    if (lambda.size() != ds.m()) throw ValidationError("unlearn: lambda length must equal m");
    if (forget.empty() || forget.size() >= ds.m())
        throw ValidationError("unlearn: forget set must be a nonempty strict subset");
    {
        std::vector<char> seen(ds.m(), 0);
        for (std::size_t r : forget) {
            if (r >= ds.m()) throw ValidationError("unlearn: forget index out of range");
            if (seen[r]) throw ValidationError("unlearn: duplicate forget index");
            seen[r] = 1;
        }
    }

    UnlearnResult out;
    out.forget = forget;
    out.theta_hat = p;
    Vec grad;
    for (std::size_t r : forget) {
        const double q = margin(p, ds, r);
        const double lp = loss_derivative(loss, q);
        if (lambda[r] != 0.0 && (lp == 0.0 || !std::isfinite(lp)))
            throw SolverError("unlearn: loss derivative left the double range at margin " +
                              std::to_string(q));
        const double beta = lambda[r] == 0.0 ? 0.0 : -lambda[r] / lp;
        out.beta.push_back(beta);
        out.lambda_forget.push_back(lambda[r]);
        if (beta == 0.0) continue;
        grad_params_into(p, ds.X.row(r), ds.d(), grad);
        // ascent step: + beta * l'(q) * y_r * grad N
        axpy(beta * lp * ds.y[r], grad.data(), out.theta_hat.theta.data(), grad.size());
    }

    // cross-check against theta - sum_r lambda_r y_r grad N(x_r, theta)
    Vec direct(p.theta);
    for (std::size_t r : forget) {
        if (lambda[r] == 0.0) continue;
        grad_params_into(p, ds.X.row(r), ds.d(), grad);
        axpy(-lambda[r] * ds.y[r], grad.data(), direct.data(), grad.size());
    }
    const double drift = max_abs_diff(out.theta_hat.theta, direct);
    Vec step(direct);
    for (std::size_t i = 0; i < step.size(); ++i) step[i] -= p.theta[i];
    const double scale_ref = std::max(norm2(p.theta), norm2(step));
    if (drift > 1e-12 * std::max(scale_ref, 1e-300))
        throw SolverError("unlearn: ascent step deviates from the multiplier identity by " +
                          std::to_string(drift));
    return out;
}

inline UnlearnResult unlearn_ga(const ModelParams& p, const Dataset& ds, std::size_t l,
                                const Vec& lambda, Loss loss) {
    return unlearn_kga(p, ds, {l}, lambda, loss);
}

// Correction witness for two-layer models:
//   w~_j = w^_j + |u_j| (sum_{l in forget} lambda_l sigma'_{l,j}) Delta_j,
//   Delta_j = sum_{k in retain} c x_k sign(<x_k, w_j>),  c = eps_d / (2mn),
// with sign(0) = +1 and both sigma' and the signs taken at the ORIGINAL
// weights. eps_d = 0 returns theta_hat unchanged.
inline ModelParams build_correction(const ModelParams& original, const UnlearnResult& result,
                                    const Dataset& ds, double eps_d) {
    if (original.kind != ModelKind::TwoLayer)
        throw ValidationError("build_correction: only two-layer models carry a correction");
    if (eps_d < 0.0) throw ValidationError("build_correction: eps_d must be >= 0");
    const std::size_t m = ds.m(), d = ds.d(), n = original.n;
    const double c = eps_d / (2.0 * static_cast<double>(m) * static_cast<double>(n));

    std::vector<char> in_forget(m, 0);
    for (std::size_t r : result.forget) in_forget[r] = 1;

    ModelParams tilde = result.theta_hat;
    if (c == 0.0) return tilde;

    Vec delta(d);
    for (std::size_t j = 0; j < n; ++j) {
        const double* wj_orig = original.neuron(j);
        double coeff = 0.0;   // sum over forget of lambda_l sigma'_{l,j}
        for (std::size_t t = 0; t < result.forget.size(); ++t)
            if (dot(wj_orig, ds.X.row(result.forget[t]), d) >= 0.0)
                coeff += result.lambda_forget[t];
        if (coeff == 0.0) continue;
        std::fill(delta.begin(), delta.end(), 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            if (in_forget[k]) continue;
            const double s = sign_pos(dot(ds.X.row(k), wj_orig, d));
            axpy(c * s, ds.X.row(k), delta.data(), d);
        }
        axpy(std::abs(original.u[j]) * coeff, delta.data(), tilde.neuron(j), d);
    }
    return tilde;
}

struct ViolationReport {
    std::size_t violations = 0;
    std::size_t pairs = 0;
    std::vector<std::pair<std::size_t, std::size_t>> flipped;   // (neuron, retain row)
};

// Counts (j, r) pairs where sign(w~_j^T x_r) differs from sign(w_j^T x_r),
// sign(0) = +1 on both sides.
inline ViolationReport verify_activation_preserved(const ModelParams& original,
                                                   const ModelParams& tilde,
                                                   const Dataset& retain) {
    if (original.kind != ModelKind::TwoLayer || tilde.kind != ModelKind::TwoLayer)
        throw ValidationError("verify_activation_preserved: two-layer models only");
    if (original.n != tilde.n || original.d != tilde.d)
        throw ValidationError("verify_activation_preserved: shape mismatch");
    ViolationReport rep;
    const std::size_t d = retain.d();
    for (std::size_t j = 0; j < original.n; ++j) {
        for (std::size_t r = 0; r < retain.m(); ++r) {
            ++rep.pairs;
            const double a = sign_pos(dot(original.neuron(j), retain.X.row(r), d));
            const double b = sign_pos(dot(tilde.neuron(j), retain.X.row(r), d));
            if (a != b) {
                ++rep.violations;
                rep.flipped.emplace_back(j, r);
            }
        }
    }
    return rep;
}

// Per-point margin differences y_r (N(tilde, x_r) - N(original, x_r)).
inline Vec margin_shift(const ModelParams& original, const ModelParams& tilde,
                        const Dataset& retain) {
    if (original.kind != ModelKind::TwoLayer || tilde.kind != ModelKind::TwoLayer)
        throw ValidationError("margin_shift: two-layer models only");
    Vec out(retain.m());
    for (std::size_t r = 0; r < retain.m(); ++r)
        out[r] = margin(tilde, retain, r) - margin(original, retain, r);
    return out;
}

}  // namespace unlearn
