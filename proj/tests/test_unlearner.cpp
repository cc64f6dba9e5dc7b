#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unlearn/kkt.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/trainer.hpp"
#include "unlearn/unlearner.hpp"

using namespace unlearn;

namespace {

struct TrainedTwoLayer {
    Dataset ds;
    ModelParams model;     // margin-rescaled
    KktCertificate cert;
};

// small two-layer model trained on orthonormal data, feasibility restored
TrainedTwoLayer trained_ortho_twolayer(std::size_t m = 4, std::size_t n = 8) {
    TrainedTwoLayer out;
    std::vector<int> labels;
    for (std::size_t i = 0; i < m; ++i) labels.push_back(i % 2 == 0 ? 1 : -1);
    out.ds = gen_orthonormal(m, m, labels);
    TrainConfig cfg;
    cfg.lr = 1.0;
    cfg.epochs = 60000;
    cfg.loss_threshold = 0.02;
    auto [trained, rep] = train_gd(init_twolayer(n, m, 1e-3, 5), out.ds, cfg);
    REQUIRE(rep.final_loss < 0.02);
    const KktCertificate raw = certify(trained, out.ds);
    out.model = rescale(trained, raw).params;
    out.cert = certify(out.model, out.ds);
    REQUIRE(out.cert.gamma <= 1e-12);
    return out;
}

// margin difference recomputed neuron by neuron, independent of margin_shift
Vec margin_shift_oracle(const ModelParams& a, const ModelParams& b, const Dataset& retain) {
    Vec out(retain.m(), 0.0);
    for (std::size_t r = 0; r < retain.m(); ++r) {
        double na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < a.n; ++j) {
            const double za = dot(a.neuron(j), retain.X.row(r), retain.d());
            const double zb = dot(b.neuron(j), retain.X.row(r), retain.d());
            if (za > 0.0) na += a.u[j] * za;
            if (zb > 0.0) nb += b.u[j] * zb;
        }
        out[r] = retain.y[r] * (nb - na);
    }
    return out;
}

}  // namespace

TEST_CASE("step size closed forms") {
    const Dataset ortho = gen_orthonormal(3, 3, {1, -1, 1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0});   // every margin is 1
    CHECK(step_size(w, ortho, 0, 1.0, Loss::Logistic) ==
          doctest::Approx(1.0 + std::exp(1.0)).epsilon(1e-12));
    CHECK(step_size(w, ortho, 1, 0.5, Loss::Exponential) ==
          doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-12));
    CHECK(step_size(w, ortho, 2, 0.0, Loss::Logistic) == 0.0);
    CHECK_THROWS_AS(step_size(w, ortho, 9, 1.0, Loss::Logistic), ValidationError);
    CHECK_THROWS_AS(step_size(w, ortho, 0, -1.0, Loss::Logistic), ValidationError);
}

TEST_CASE("single-point ascent on the orthonormal instance") {
    const Dataset ortho = gen_orthonormal(3, 3, {1, -1, 1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0});
    const Vec lambda = {1.0, 1.0, 1.0};

    const UnlearnResult r = unlearn_ga(w, ortho, 0, lambda, Loss::Logistic);
    CHECK(r.theta_hat.theta[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.theta_hat.theta[1] == -1.0);
    CHECK(r.theta_hat.theta[2] == 1.0);
    CHECK(r.beta.size() == 1);
    CHECK(r.beta[0] > 0.0);

    // unlearned predictor is the exact retained max-margin solution
    const Split split = split_forget(ortho, {0});
    const KktCertificate cert = certify(r.theta_hat, split.retain);
    CHECK(cert.eps <= 1e-9);
    CHECK(std::abs(cert.delta) <= 1e-9);
    CHECK(cert.gamma <= 1e-9);
    const Vec wstar = train_maxmargin_linear(split.retain);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(r.theta_hat.theta[k] == doctest::Approx(wstar[k]).epsilon(1e-8));

    // vanishing multiplier leaves the parameters untouched
    const UnlearnResult none = unlearn_ga(w, ortho, 0, {0.0, 1.0, 1.0}, Loss::Logistic);
    CHECK(none.theta_hat.theta == w.theta);
    CHECK(none.beta[0] == 0.0);
}

TEST_CASE("batch ascent removes every forgotten component at once") {
    const Dataset ortho = gen_orthonormal(4, 4, {1, -1, 1, -1});
    const ModelParams w = make_linear({1.0, -1.0, 1.0, -1.0});
    const Vec lambda = {1.0, 1.0, 1.0, 1.0};

    const UnlearnResult r = unlearn_kga(w, ortho, {0, 2}, lambda, Loss::Exponential);
    CHECK(r.theta_hat.theta[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.theta_hat.theta[1] == -1.0);
    CHECK(r.theta_hat.theta[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.theta_hat.theta[3] == -1.0);

    // k = 1 reduces to the single-point step bit for bit
    const UnlearnResult one = unlearn_kga(w, ortho, {1}, lambda, Loss::Logistic);
    const UnlearnResult ga = unlearn_ga(w, ortho, 1, lambda, Loss::Logistic);
    CHECK(one.theta_hat.theta == ga.theta_hat.theta);
    CHECK(one.beta == ga.beta);

    const UnlearnResult frozen = unlearn_kga(w, ortho, {0, 2}, {0.0, 1.0, 0.0, 1.0}, Loss::Logistic);
    CHECK(frozen.theta_hat.theta == w.theta);

    CHECK_THROWS_AS(unlearn_kga(w, ortho, {}, lambda, Loss::Logistic), ValidationError);
    CHECK_THROWS_AS(unlearn_kga(w, ortho, {0, 1, 2, 3}, lambda, Loss::Logistic), ValidationError);
    CHECK_THROWS_AS(unlearn_kga(w, ortho, {0, 0}, lambda, Loss::Logistic), ValidationError);
    CHECK_THROWS_AS(unlearn_kga(w, ortho, {7}, lambda, Loss::Logistic), ValidationError);
}

TEST_CASE("ascent step equals multiplier-weighted gradient subtraction") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream rs(seed, "prop");
        const std::size_t m = 2 + rs.next_u64() % 5;
        const std::size_t d = 2 + rs.next_u64() % 7;
        const Dataset ds = gen_isotropic(m, d, seed);
        ModelParams p;
        if (seed % 2 == 0) {
            Vec w(d);
            for (double& v : w) v = rs.next_normal();
            p = make_linear(std::move(w));
        } else {
            p = init_twolayer(1 + rs.next_u64() % 4, d, 1.0, seed + 1000);
        }
        Vec lambda(m);
        for (double& v : lambda) v = 2.0 * rs.next_uniform();
        const std::size_t l = rs.next_u64() % m;
        const Loss loss = seed % 3 == 0 ? Loss::Exponential : Loss::Logistic;

        const UnlearnResult r = unlearn_ga(p, ds, l, lambda, loss);
        Vec direct = p.theta;
        Vec g;
        grad_params_into(p, ds.X.row(l), ds.d(), g);
        axpy(-lambda[l] * ds.y[l], g.data(), direct.data(), direct.size());
        Vec diff = r.theta_hat.theta;
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= direct[i];
        CHECK(norm2(diff) <= 1e-12 * norm2(p.theta));
        CHECK((r.beta[0] > 0.0) == (lambda[l] > 0.0));
    }
}

TEST_CASE("correction is inert when the multiplier or eps_d vanish") {
    const TrainedTwoLayer t = trained_ortho_twolayer();
    Vec lambda_zero(t.ds.m(), 0.0);
    const UnlearnResult frozen = unlearn_ga(t.model, t.ds, 0, lambda_zero, Loss::Logistic);
    const ModelParams tilde0 = build_correction(t.model, frozen, t.ds, 0.01);
    CHECK(tilde0.theta == frozen.theta_hat.theta);
    CHECK(tilde0.theta == t.model.theta);

    const UnlearnResult real = unlearn_ga(t.model, t.ds, 0, t.cert.lambda, Loss::Logistic);
    const ModelParams no_eps = build_correction(t.model, real, t.ds, 0.0);
    CHECK(no_eps.theta == real.theta_hat.theta);

    const ModelParams lin = make_linear({1.0, 0.0});
    UnlearnResult fake;
    fake.forget = {0};
    fake.lambda_forget = {1.0};
    fake.theta_hat = lin;
    CHECK_THROWS_AS(build_correction(lin, fake, t.ds, 0.01), ValidationError);
}

TEST_CASE("correction norm, activation preservation and margin shift on orthonormal data") {
    const TrainedTwoLayer t = trained_ortho_twolayer();
    const double eps_d = 0.01;
    const std::size_t m = t.ds.m(), n = t.model.n;

    for (std::vector<std::size_t> forget : {std::vector<std::size_t>{0},
                                            std::vector<std::size_t>{1, 3}}) {
        const double k = static_cast<double>(forget.size());
        const UnlearnResult r = unlearn_kga(t.model, t.ds, forget, t.cert.lambda, Loss::Logistic);
        const ModelParams tilde = build_correction(t.model, r, t.ds, eps_d);
        const Split split = split_forget(t.ds, forget);

        // the fixed second-layer signs never change
        CHECK(r.theta_hat.u == t.model.u);
        CHECK(tilde.u == t.model.u);

        Vec diff = tilde.theta;
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= r.theta_hat.theta[i];
        CHECK(norm2(diff) <= 22.0 * k * eps_d / std::sqrt(static_cast<double>(m)));

        const ViolationReport vr = verify_activation_preserved(t.model, tilde, split.retain);
        CHECK(vr.violations == 0);
        CHECK(vr.pairs == split.retain.m() * n);

        const Vec shifts = margin_shift(t.model, tilde, split.retain);
        const Vec oracle = margin_shift_oracle(t.model, tilde, split.retain);
        const double bound = 9.0 * k * eps_d / (static_cast<double>(m) * static_cast<double>(n));
        for (std::size_t i = 0; i < shifts.size(); ++i) {
            CHECK(std::abs(shifts[i] - oracle[i]) <= 1e-12);
            CHECK(std::abs(shifts[i]) <= bound + 1e-12);
        }
    }
}

TEST_CASE("activation check counts sign flips, with ties staying positive") {
    const TrainedTwoLayer t = trained_ortho_twolayer(3, 4);
    const Split split = split_forget(t.ds, {0});

    const ViolationReport same = verify_activation_preserved(t.model, t.model, split.retain);
    CHECK(same.violations == 0);

    ModelParams negated = t.model;
    for (double& v : negated.theta) v = -v;
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < t.model.n; ++j)
        for (std::size_t r = 0; r < split.retain.m(); ++r)
            if (dot(t.model.neuron(j), split.retain.X.row(r), split.retain.d()) != 0.0) ++nonzero;
    const ViolationReport flipped = verify_activation_preserved(t.model, negated, split.retain);
    CHECK(flipped.violations == nonzero);

    const Vec zero_shift = margin_shift(t.model, t.model, split.retain);
    for (double s : zero_shift) CHECK(s == 0.0);
}
