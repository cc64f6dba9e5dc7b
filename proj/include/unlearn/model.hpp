#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "unlearn/common.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

enum class ModelKind { Linear, TwoLayer };

inline std::string to_string(ModelKind k) {
    return k == ModelKind::Linear ? "linear" : "twolayer";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "twolayer") return ModelKind::TwoLayer;
    throw ParseError("unknown model kind '" + s + "'");
}

// Homogeneous predictor. theta is the trainable parameter vector: the weight
// vector itself for Linear, the row-major (neuron-major) flattening of the
// first-layer matrix W for TwoLayer. u holds the fixed second-layer signs
// ±1/sqrt(n) and is never mutated after initialization.
struct ModelParams {
    ModelKind kind = ModelKind::Linear;
    std::size_t d = 0;
    std::size_t n = 0;   // neuron count, 0 for Linear
    Vec theta;
    Vec u;

    std::size_t dim() const { return theta.size(); }
    double* neuron(std::size_t j) { return theta.data() + j * d; }
    const double* neuron(std::size_t j) const { return theta.data() + j * d; }
};

inline ModelParams make_linear(Vec w) {
    ModelParams p;
    p.kind = ModelKind::Linear;
    p.d = w.size();
    p.theta = std::move(w);
    return p;
}

inline ModelParams make_twolayer(Matrix W, Vec u) {
    if (W.rows != u.size()) throw ValidationError("make_twolayer: W rows must match u length");
    ModelParams p;
    p.kind = ModelKind::TwoLayer;
    p.d = W.cols;
    p.n = W.rows;
    p.theta = std::move(W.a);
    p.u = std::move(u);
    return p;
}

// W entries N(0,1)*init_scale (substream "w-row" per neuron), u_j a fair coin
// over ±1/sqrt(n) (substream "u" per neuron).
inline ModelParams init_twolayer(std::size_t n, std::size_t d, double init_scale,
                                 std::uint64_t seed) {
    if (n < 1 || d < 1) throw ValidationError("init_twolayer: n and d must be >= 1");
    if (!(init_scale > 0.0)) throw ValidationError("init_twolayer: init_scale must be positive");
    ModelParams p;
    p.kind = ModelKind::TwoLayer;
    p.d = d;
    p.n = n;
    p.theta.resize(n * d);
    p.u.resize(n);
    const double mag = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        RngStream row(seed, "w-row", j);
        double* wj = p.neuron(j);
        for (std::size_t k = 0; k < d; ++k) wj[k] = init_scale * row.next_normal();
        RngStream us(seed, "u", j);
        p.u[j] = us.next_sign() * mag;
    }
    return p;
}

namespace detail {
inline void check_input_dim(const ModelParams& p, std::size_t xd) {
    if (xd != p.d)
        throw ValidationError("input dimension " + std::to_string(xd) +
                              " does not match model dimension " + std::to_string(p.d));
}
}  // namespace detail

inline double forward(const ModelParams& p, const double* x, std::size_t xd) {
    detail::check_input_dim(p, xd);
    if (p.kind == ModelKind::Linear) return dot(p.theta.data(), x, p.d);
    double out = 0.0;
    for (std::size_t j = 0; j < p.n; ++j) {
        const double z = dot(p.neuron(j), x, p.d);
        if (z > 0.0) out += p.u[j] * z;
    }
    return out;
}

inline double forward(const ModelParams& p, const Vec& x) {
    return forward(p, x.data(), x.size());
}

// Gradient of the margin N(theta, x) in theta, written into out (theta-shaped).
// TwoLayer block j is u_j * [<w_j, x> >= 0] * x; the ReLU derivative at the
// tie <w_j, x> = 0 is taken as 1.
inline void grad_params_into(const ModelParams& p, const double* x, std::size_t xd, Vec& out) {
    detail::check_input_dim(p, xd);
    out.assign(p.dim(), 0.0);
    if (p.kind == ModelKind::Linear) {
        for (std::size_t k = 0; k < p.d; ++k) out[k] = x[k];
        return;
    }
    for (std::size_t j = 0; j < p.n; ++j) {
        const double z = dot(p.neuron(j), x, p.d);
        if (z >= 0.0) {
            double* blk = out.data() + j * p.d;
            for (std::size_t k = 0; k < p.d; ++k) blk[k] = p.u[j] * x[k];
        }
    }
}

inline Vec grad_params(const ModelParams& p, const Vec& x) {
    Vec g;
    grad_params_into(p, x.data(), x.size(), g);
    return g;
}

// m x n boolean matrix, entry (i, j) = [<w_j, x_i> >= 0].
struct ActivationMap {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> bits;

    bool active(std::size_t i, std::size_t j) const { return bits[i * n + j] != 0; }
};

inline ActivationMap activation_map(const ModelParams& p, const Dataset& ds) {
    if (p.kind != ModelKind::TwoLayer)
        throw ValidationError("activation_map: defined for two-layer models only");
    detail::check_input_dim(p, ds.d());
    ActivationMap map;
    map.m = ds.m();
    map.n = p.n;
    map.bits.resize(map.m * map.n);
    for (std::size_t i = 0; i < map.m; ++i) {
        const double* xi = ds.X.row(i);
        for (std::size_t j = 0; j < p.n; ++j)
            map.bits[i * map.n + j] = dot(p.neuron(j), xi, p.d) >= 0.0 ? 1 : 0;
    }
    return map;
}

// Multiplies the trainable parameters by c > 0; u is untouched.
inline ModelParams scale(const ModelParams& p, double c) {
    if (!(c > 0.0)) throw ValidationError("scale: factor must be positive");
    ModelParams q = p;
    scale_inplace(q.theta, c);
    return q;
}

inline double margin(const ModelParams& p, const Dataset& ds, std::size_t i) {
    return ds.y[i] * forward(p, ds.X.row(i), ds.d());
}

inline Vec margins(const ModelParams& p, const Dataset& ds) {
    Vec out(ds.m());
    for (std::size_t i = 0; i < ds.m(); ++i) out[i] = margin(p, ds, i);
    return out;
}

}  // namespace unlearn
