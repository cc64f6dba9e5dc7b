#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "unlearn/common.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/kkt.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/model.hpp"

namespace unlearn {

inline double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ValidationError("cosine_similarity: size mismatch");
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("cosine_similarity: undefined for a zero vector");
    const double v = dot(a, b) / (na * nb);
    return std::min(1.0, std::max(-1.0, v));
}

inline double cosine_similarity(const ModelParams& a, const ModelParams& b) {
    if (a.kind != b.kind || a.d != b.d || a.n != b.n)
        throw ValidationError("cosine_similarity: parameter shape mismatch");
    return cosine_similarity(a.theta, b.theta);
}

enum class WitnessKind { CorrectedRescaled, RetrainedLinearMaxMargin, RetrainedGd };

inline std::string to_string(WitnessKind k) {
    switch (k) {
        case WitnessKind::CorrectedRescaled: return "corrected_rescaled";
        case WitnessKind::RetrainedLinearMaxMargin: return "retrained_maxmargin";
        case WitnessKind::RetrainedGd: return "retrained_gd";
    }
    return "?";
}

struct SuccessInputs {
    double eps1 = 0.0;    // certificate quality of the trained model on S
    double delta1 = 0.0;
    double eps_d = 0.0;   // near-orthogonality budget
    std::size_t m = 0;    // original training set size
    std::size_t k = 1;    // forget set size
    std::size_t n = 0;    // neurons, two-layer only
};

// Guarantee formulas. k = 1 gives the single-point forms; k > 1 scales the
// data-dependent additive terms by k and replaces m with m/k inside the
// multiplicative corrections.
inline double theorem_eps(ModelKind kind, const SuccessInputs& in) {
    const double m = static_cast<double>(in.m), k = static_cast<double>(in.k);
    if (kind == ModelKind::Linear)
        return in.eps1 + in.eps1 * in.eps_d / (m / k - in.eps_d);
    return in.eps1 + 9.0 * in.eps_d * in.eps1 / (m / k - 9.0 * in.eps_d) +
           23.0 * k * in.eps_d / std::sqrt(m);
}

inline double theorem_delta(ModelKind kind, const SuccessInputs& in) {
    const double m = static_cast<double>(in.m), k = static_cast<double>(in.k);
    if (kind == ModelKind::Linear)
        return in.delta1 + in.delta1 * in.eps_d / (m / k - in.eps_d) +
               7.2 * k * in.eps_d / m;
    return in.delta1 + 9.0 * in.eps_d * in.delta1 / (m / k - 9.0 * in.eps_d) +
           22.6 * k * in.eps_d / m;
}

inline double theorem_tau(ModelKind kind, const SuccessInputs& in) {
    if (kind == ModelKind::Linear) return 0.0;   // exact retrain witness
    return 82.0 * static_cast<double>(in.k) * in.eps_d / static_cast<double>(in.m);
}

inline bool theorem_preconditions_met(ModelKind kind, const SuccessInputs& in,
                                      const AssumptionReport& report) {
    const double m = static_cast<double>(in.m);
    if (report.psi > 0.1) return false;
    if (kind == ModelKind::Linear)
        return in.eps_d < 0.1 && in.eps1 <= 0.5 && in.delta1 <= 0.5 &&
               report.phi <= in.eps_d / (4.0 * m);
    return in.eps_d <= 0.01 && in.eps1 <= 1.0 && in.delta1 <= 1.0 &&
           report.phi <= in.eps_d / (4.0 * m * static_cast<double>(in.n));
}

struct SuccessReport {
    double eps_measured = 0.0;
    double delta_measured = 0.0;
    double tau_measured = 0.0;   // 1 - cossim(theta_hat, witness)
    double theorem_eps = 0.0;
    double theorem_delta = 0.0;
    double theorem_tau = 0.0;
    WitnessKind witness_kind = WitnessKind::RetrainedLinearMaxMargin;
    bool preconditions_met = false;
};

// The witness must already be certified on the retain set with restored
// feasibility; the measured triple pairs its certificate with the cosine
// distance from the unlearned parameters.
inline SuccessReport success_report(const ModelParams& theta_hat, const ModelParams& witness,
                                    const KktCertificate& witness_cert, const Dataset& retain,
                                    WitnessKind kind, const SuccessInputs& inputs,
                                    const AssumptionReport& audit_report) {
    if (witness_cert.margins.size() != retain.m())
        throw ValidationError("success_report: witness certificate does not match retain set");
    if (witness_cert.gamma > 1e-9)
        throw ValidationError(
            "success_report: witness not feasible on retain (gamma = " +
            std::to_string(witness_cert.gamma) + "); certify and rescale it first");
    SuccessReport rep;
    rep.witness_kind = kind;
    rep.eps_measured = witness_cert.eps;
    rep.delta_measured = witness_cert.delta;
    rep.tau_measured = 1.0 - cosine_similarity(theta_hat, witness);
    const ModelKind mk =
        theta_hat.kind == ModelKind::TwoLayer ? ModelKind::TwoLayer : ModelKind::Linear;
    rep.theorem_eps = theorem_eps(mk, inputs);
    rep.theorem_delta = theorem_delta(mk, inputs);
    rep.theorem_tau = theorem_tau(mk, inputs);
    rep.preconditions_met = theorem_preconditions_met(mk, inputs, audit_report);
    return rep;
}

struct RetrainComparison {
    double cossim = 0.0;
    double margin_max_abs_diff = 0.0;   // margins of the unit-normalized params
};

inline RetrainComparison compare_to_retrain(const ModelParams& theta_hat,
                                            const ModelParams& theta_retrained,
                                            const Dataset& retain) {
    if (theta_hat.kind != theta_retrained.kind || theta_hat.dim() != theta_retrained.dim())
        throw ValidationError("compare_to_retrain: shape mismatch");
    RetrainComparison out;
    out.cossim = cosine_similarity(theta_hat, theta_retrained);
    const double na = norm2(theta_hat.theta), nb = norm2(theta_retrained.theta);
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("compare_to_retrain: zero parameter vector");
    const ModelParams a = scale(theta_hat, 1.0 / na);
    const ModelParams b = scale(theta_retrained, 1.0 / nb);
    for (std::size_t r = 0; r < retain.m(); ++r)
        out.margin_max_abs_diff = std::max(
            out.margin_max_abs_diff, std::abs(margin(a, retain, r) - margin(b, retain, r)));
    return out;
}

// How far the do-nothing unlearner sits from the witness; the pipeline
// checks this gap exceeds the gap of the actual unlearned parameters.
inline double identity_baseline(const ModelParams& theta_original, const ModelParams& witness) {
    return 1.0 - cosine_similarity(theta_original, witness);
}

// Fraction of n_test fresh mixture draws classified with strict margin
// y * N > 0. Sub-seeded from ("test", i) so batches are reproducible.
inline double generalization_accuracy(const ModelParams& p, std::size_t d, double alpha,
                                      std::size_t n_test, std::uint64_t seed) {
    if (n_test == 0) throw ValidationError("generalization_accuracy: n_test must be positive");
    if (!(alpha > 0.0 && alpha < 0.25))
        throw ValidationError("generalization_accuracy: alpha must lie in (0, 0.25)");
    detail::check_input_dim(p, d);
    const double mu_norm = std::pow(static_cast<double>(d), -alpha);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d));
    Vec x(d);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
        RngStream cs(seed, "test-cluster", i);
        const int cluster = cs.next_sign();
        RngStream row(seed, "test-row", i);
        for (std::size_t j = 0; j < d; ++j) x[j] = sigma * row.next_normal();
        x[0] += cluster * mu_norm;
        if (cluster * forward(p, x.data(), d) > 0.0) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_test);
}

}  // namespace unlearn
