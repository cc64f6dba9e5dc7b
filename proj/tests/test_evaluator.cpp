#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unlearn/evaluator.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/trainer.hpp"
#include "unlearn/unlearner.hpp"

using namespace unlearn;

TEST_CASE("cosine similarity basics") {
    const Vec a = {1.0, 2.0, -3.0};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));

    Vec b = a;
    scale_inplace(b, 2.0);
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK(cosine_similarity({1.0, 0.0}, {0.0, 1.0}) == 0.0);
    CHECK_THROWS_AS(cosine_similarity({0.0, 0.0}, {1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(cosine_similarity({1.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("cosine similarity is scale invariant to machine precision") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rs(seed, "cs");
        Vec a(8), b(8);
        for (double& v : a) v = rs.next_normal();
        for (double& v : b) v = rs.next_normal();
        const double base = cosine_similarity(a, b);
        for (double c : {1e-3, 0.5, 2.0, 1e4}) {
            Vec bc = b;
            scale_inplace(bc, c);
            CHECK(std::abs(cosine_similarity(a, bc) - base) <= 1e-14);
        }
    }
}

TEST_CASE("tau vanishes exactly on positive multiples") {
    RngStream rs(3, "tau");
    Vec a(16);
    for (double& v : a) v = rs.next_normal();
    const ModelParams pa = make_linear(a);
    const ModelParams pb = scale(pa, 7.5);
    CHECK(1.0 - cosine_similarity(pa, pb) <= 1e-9);

    Vec c = a;
    c[0] += 0.5;   // genuinely different direction
    CHECK(1.0 - cosine_similarity(pa, make_linear(c)) > 1e-9);
}

TEST_CASE("theorem triples match hand-expanded arithmetic") {
    // two-layer spot check from the guarantee formula
    SuccessInputs in;
    in.eps1 = 0.01;
    in.delta1 = 0.0;
    in.eps_d = 0.01;
    in.m = 100;
    in.k = 1;
    in.n = 4;
    const double expected = 0.01 + 9.0 * 0.01 * 0.01 / (100.0 - 0.09) + 23.0 * 0.01 / 10.0;
    CHECK(theorem_eps(ModelKind::TwoLayer, in) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(theorem_eps(ModelKind::TwoLayer, in) == doctest::Approx(0.0330090081).epsilon(1e-9));

    // purity: random inputs against an independently-written expansion
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        RngStream rs(seed, "formulas");
        SuccessInputs r;
        r.eps1 = rs.next_uniform();
        r.delta1 = rs.next_uniform();
        r.eps_d = 0.01 * rs.next_uniform();
        r.m = 5 + rs.next_u64() % 100;
        r.k = 1 + rs.next_u64() % 4;
        r.n = 1 + rs.next_u64() % 50;
        const double m = static_cast<double>(r.m), k = static_cast<double>(r.k);

        const double lin_eps = r.eps1 + r.eps1 * r.eps_d / (m / k - r.eps_d);
        const double lin_delta =
            r.delta1 + r.delta1 * r.eps_d / (m / k - r.eps_d) + 7.2 * k * r.eps_d / m;
        CHECK(theorem_eps(ModelKind::Linear, r) == doctest::Approx(lin_eps).epsilon(1e-14));
        CHECK(theorem_delta(ModelKind::Linear, r) == doctest::Approx(lin_delta).epsilon(1e-14));
        CHECK(theorem_tau(ModelKind::Linear, r) == 0.0);

        const double two_eps = r.eps1 + 9.0 * r.eps_d * r.eps1 / (m / k - 9.0 * r.eps_d) +
                               23.0 * k * r.eps_d / std::sqrt(m);
        const double two_delta = r.delta1 + 9.0 * r.eps_d * r.delta1 / (m / k - 9.0 * r.eps_d) +
                                 22.6 * k * r.eps_d / m;
        const double two_tau = 82.0 * k * r.eps_d / m;
        CHECK(theorem_eps(ModelKind::TwoLayer, r) == doctest::Approx(two_eps).epsilon(1e-14));
        CHECK(theorem_delta(ModelKind::TwoLayer, r) == doctest::Approx(two_delta).epsilon(1e-14));
        CHECK(theorem_tau(ModelKind::TwoLayer, r) == doctest::Approx(two_tau).epsilon(1e-14));

        // k = 1 batch forms coincide with the single-point forms
        SuccessInputs single = r;
        single.k = 1;
        const double mm = static_cast<double>(single.m);
        CHECK(theorem_eps(ModelKind::Linear, single) ==
              doctest::Approx(single.eps1 + single.eps1 * single.eps_d / (mm - single.eps_d))
                  .epsilon(1e-14));
        CHECK(theorem_tau(ModelKind::TwoLayer, single) ==
              doctest::Approx(82.0 * single.eps_d / mm).epsilon(1e-14));
    }
}

TEST_CASE("success report on the orthonormal analytic pipeline") {
    const Dataset ortho = gen_orthonormal(3, 3, {1, -1, 1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0});
    const KktCertificate cert = certify(w, ortho);
    const UnlearnResult r = unlearn_ga(w, ortho, 0, cert.lambda, Loss::Logistic);
    const Split split = split_forget(ortho, {0});

    const KktCertificate wit_cert = certify(r.theta_hat, split.retain);
    const AssumptionReport rep = audit(ortho);
    SuccessInputs in;
    in.eps1 = cert.eps;
    in.delta1 = std::max(0.0, cert.delta);
    in.eps_d = rep.eps_d_linear();
    in.m = 3;
    in.k = 1;

    const SuccessReport sr = success_report(r.theta_hat, r.theta_hat, wit_cert, split.retain,
                                            WitnessKind::CorrectedRescaled, in, rep);
    CHECK(sr.eps_measured <= 1e-9);
    CHECK(std::abs(sr.delta_measured) <= 1e-9);
    CHECK(sr.tau_measured <= 1e-9);
    CHECK(sr.theorem_eps <= 1e-9);
    CHECK(sr.theorem_delta <= 1e-9);
    CHECK(sr.theorem_tau == 0.0);
    CHECK(sr.preconditions_met);

    // a witness that was never made feasible is rejected
    KktCertificate infeasible = wit_cert;
    infeasible.gamma = 0.2;
    CHECK_THROWS_AS(success_report(r.theta_hat, r.theta_hat, infeasible, split.retain,
                                   WitnessKind::CorrectedRescaled, in, rep),
                    ValidationError);
}

TEST_CASE("identity baseline gaps on the orthonormal family") {
    const Dataset ortho = gen_orthonormal(3, 3, {1, -1, 1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0});
    CHECK(identity_baseline(w, w) == doctest::Approx(0.0).epsilon(1e-15));

    const KktCertificate cert = certify(w, ortho);
    const UnlearnResult r = unlearn_ga(w, ortho, 0, cert.lambda, Loss::Logistic);
    const double gap = identity_baseline(w, r.theta_hat);
    CHECK(gap == doctest::Approx(1.0 - 2.0 / std::sqrt(6.0)).epsilon(1e-9));

    // closed form 1 - sqrt((m-1)/m), decreasing in m
    double prev = 1.0;
    for (std::size_t m = 3; m <= 8; ++m) {
        std::vector<int> labels;
        for (std::size_t i = 0; i < m; ++i) labels.push_back(i % 2 == 0 ? 1 : -1);
        const Dataset ds = gen_orthonormal(m, m, labels);
        Vec wv(m);
        for (std::size_t i = 0; i < m; ++i) wv[i] = labels[i];
        const ModelParams wm = make_linear(wv);
        const KktCertificate cm = certify(wm, ds);
        const UnlearnResult rm = unlearn_ga(wm, ds, 0, cm.lambda, Loss::Logistic);
        const double g = identity_baseline(wm, rm.theta_hat);
        const double md = static_cast<double>(m);
        CHECK(g == doctest::Approx(1.0 - std::sqrt((md - 1.0) / md)).epsilon(1e-9));
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("comparison against the retrained predictor") {
    const Dataset ortho = gen_orthonormal(3, 3, {1, -1, 1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0});
    const KktCertificate cert = certify(w, ortho);
    const UnlearnResult r = unlearn_ga(w, ortho, 0, cert.lambda, Loss::Logistic);
    const Split split = split_forget(ortho, {0});
    const ModelParams wstar = make_linear(train_maxmargin_linear(split.retain));

    const RetrainComparison rc = compare_to_retrain(r.theta_hat, wstar, split.retain);
    CHECK(rc.cossim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rc.margin_max_abs_diff <= 1e-9);

    const RetrainComparison scaled = compare_to_retrain(scale(wstar, 3.0), wstar, split.retain);
    CHECK(scaled.cossim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scaled.margin_max_abs_diff <= 1e-12);

    CHECK_THROWS_AS(compare_to_retrain(w, make_linear({1.0, 2.0}), split.retain),
                    ValidationError);
}

TEST_CASE("unrelated high-dimensional directions are nearly orthogonal") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream ra(seed, "a"), rb(seed, "b");
        Vec a(1000), b(1000);
        for (double& v : a) v = ra.next_normal();
        for (double& v : b) v = rb.next_normal();
        if (std::abs(cosine_similarity(a, b)) < 0.2) ++ok;
    }
    CHECK(ok >= 99);   // |cossim| concentrates around 1/sqrt(d) ~ 0.03
}

TEST_CASE("generalization accuracy for mixture draws") {
    CHECK_THROWS_AS(generalization_accuracy(make_linear({0.0, 0.0}), 2, 0.1, 0, 1),
                    ValidationError);

    // the all-zero predictor never satisfies the strict-margin rule
    const std::size_t d = 500;
    CHECK(generalization_accuracy(make_linear(Vec(d, 0.0)), d, 0.1, 200, 7) == 0.0);

    // the cluster-mean direction separates the mixture with a huge margin
    Vec mu(d, 0.0);
    mu[0] = 1.0;
    CHECK(generalization_accuracy(make_linear(mu), d, 0.1, 1000, 7) >= 0.99);
}
