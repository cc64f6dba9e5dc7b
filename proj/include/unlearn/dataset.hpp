#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/common.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

enum class DatasetKind { Isotropic, Mixture, Orthonormal };

inline std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Isotropic: return "isotropic";
        case DatasetKind::Mixture: return "mixture";
        case DatasetKind::Orthonormal: return "orthonormal";
    }
    return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "isotropic") return DatasetKind::Isotropic;
    if (s == "mixture") return DatasetKind::Mixture;
    if (s == "orthonormal") return DatasetKind::Orthonormal;
    throw ParseError("unknown dataset kind '" + s + "'");
}

// Immutable after creation. orig_index maps each row back to the row index
// in the dataset it was generated in (identity for freshly generated data,
// preserved by split_forget).
struct Dataset {
    Matrix X;                       // m x d sample matrix
    std::vector<int> y;             // labels in {-1, +1}
    DatasetKind kind = DatasetKind::Isotropic;
    std::uint64_t seed = 0;
    std::optional<double> alpha;    // Mixture only
    std::vector<std::size_t> orig_index;

    std::size_t m() const { return X.rows; }
    std::size_t d() const { return X.cols; }
};

struct AssumptionReport {
    double psi = 0.0;   // max_i |‖x_i‖^2 - 1|
    double phi = 0.0;   // max_{i≠j} |<x_i, x_j>|
    std::size_t m = 0;

    double eps_d_linear() const { return 4.0 * static_cast<double>(m) * phi; }
    double eps_d_twolayer(std::size_t n) const {
        return 4.0 * static_cast<double>(m) * static_cast<double>(n) * phi;
    }
    bool holds_linear(double psi0, double eps_d) const {
        return psi <= psi0 && phi <= eps_d / (4.0 * static_cast<double>(m));
    }
    bool holds_twolayer(double psi0, double eps_d, std::size_t n) const {
        return psi <= psi0 &&
               phi <= eps_d / (4.0 * static_cast<double>(m) * static_cast<double>(n));
    }
};

namespace detail {
inline void check_dims(std::size_t m, std::size_t d) {
    if (m < 2) throw ValidationError("dataset needs m >= 2, got m=" + std::to_string(m));
    if (d < 1) throw ValidationError("dataset needs d >= 1, got d=" + std::to_string(d));
}

inline void fill_identity_index(Dataset& ds) {
    ds.orig_index.resize(ds.m());
    for (std::size_t i = 0; i < ds.m(); ++i) ds.orig_index[i] = i;
}
}  // namespace detail

enum class LabelRule { RandomSigns, Provided };

// Rows i.i.d. N(0, I_d / d); labels are fair signs unless provided.
// Substreams: row i coordinates from ("x-row", i), label i from ("label", i).
inline Dataset gen_isotropic(std::size_t m, std::size_t d, std::uint64_t seed,
                             LabelRule rule = LabelRule::RandomSigns,
                             const std::vector<int>* labels = nullptr) {
    detail::check_dims(m, d);
    if (rule == LabelRule::Provided) {
        if (labels == nullptr || labels->size() != m)
            throw ValidationError("gen_isotropic: provided labels must have length m");
    }
    Dataset ds;
    ds.kind = DatasetKind::Isotropic;
    ds.seed = seed;
    ds.X = Matrix(m, d);
    ds.y.resize(m);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < m; ++i) {
        RngStream row(seed, "x-row", i);
        double* xi = ds.X.row(i);
        for (std::size_t j = 0; j < d; ++j) xi[j] = sigma * row.next_normal();
        if (rule == LabelRule::Provided) {
            const int lab = (*labels)[i];
            if (lab != 1 && lab != -1)
                throw ValidationError("gen_isotropic: labels must be +1 or -1");
            ds.y[i] = lab;
        } else {
            RngStream ls(seed, "label", i);
            ds.y[i] = ls.next_sign();
        }
    }
    detail::fill_identity_index(ds);
    return ds;
}

// Two opposite Gaussian clusters: means ±mu with ‖mu‖ = d^-alpha along e_1,
// noise N(0, I_d / d); y_i = +1 iff the positive cluster was drawn.
inline Dataset gen_mixture(std::size_t m, std::size_t d, double alpha, std::uint64_t seed) {
    detail::check_dims(m, d);
    if (!(alpha > 0.0 && alpha < 0.25))
        throw ValidationError("gen_mixture: alpha must lie in (0, 0.25)");
    Dataset ds;
    ds.kind = DatasetKind::Mixture;
    ds.seed = seed;
    ds.alpha = alpha;
    ds.X = Matrix(m, d);
    ds.y.resize(m);
    const double mu_norm = std::pow(static_cast<double>(d), -alpha);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < m; ++i) {
        RngStream cs(seed, "cluster", i);
        const int cluster = cs.next_sign();
        RngStream row(seed, "x-row", i);
        double* xi = ds.X.row(i);
        for (std::size_t j = 0; j < d; ++j) xi[j] = sigma * row.next_normal();
        xi[0] += cluster * mu_norm;
        ds.y[i] = cluster;
    }
    detail::fill_identity_index(ds);
    return ds;
}

// Idealized regime: rows are the first m standard basis vectors, so the
// audit yields psi = phi = 0 exactly.
inline Dataset gen_orthonormal(std::size_t m, std::size_t d, const std::vector<int>& labels) {
    detail::check_dims(m, d);
    if (m > d)
        throw ValidationError("gen_orthonormal: needs m <= d, got m=" + std::to_string(m) +
                              " d=" + std::to_string(d));
    if (labels.size() != m) throw ValidationError("gen_orthonormal: labels must have length m");
    Dataset ds;
    ds.kind = DatasetKind::Orthonormal;
    ds.seed = 0;
    ds.X = Matrix(m, d);
    ds.y.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] != 1 && labels[i] != -1)
            throw ValidationError("gen_orthonormal: labels must be +1 or -1");
        ds.X.at(i, i) = 1.0;
        ds.y[i] = labels[i];
    }
    detail::fill_identity_index(ds);
    return ds;
}

// Exact maxima over points / ordered pairs, O(m^2 d).
inline AssumptionReport audit(const Dataset& ds) {
    AssumptionReport r;
    r.m = ds.m();
    const std::size_t m = ds.m(), d = ds.d();
    for (std::size_t i = 0; i < m; ++i) {
        const double n2 = norm2_sq(ds.X.row(i), d);
        r.psi = std::max(r.psi, std::abs(n2 - 1.0));
        for (std::size_t j = i + 1; j < m; ++j)
            r.phi = std::max(r.phi, std::abs(dot(ds.X.row(i), ds.X.row(j), d)));
    }
    return r;
}

struct Split {
    Dataset retain;
    Dataset forget;
};

// Disjoint partition preserving row order; orig_index keeps the mapping to
// the parent dataset's rows.
inline Split split_forget(const Dataset& ds, const std::vector<std::size_t>& forget) {
    const std::size_t m = ds.m(), d = ds.d();
    if (forget.empty()) throw ValidationError("split_forget: forget set is empty");
    std::vector<char> is_forget(m, 0);
    for (std::size_t idx : forget) {
        if (idx >= m) throw ValidationError("split_forget: index out of range");
        if (is_forget[idx]) throw ValidationError("split_forget: duplicate forget index");
        is_forget[idx] = 1;
    }
    if (forget.size() >= m) throw ValidationError("split_forget: forget set must be a strict subset");

    Split s;
    for (Dataset* part : {&s.retain, &s.forget}) {
        part->kind = ds.kind;
        part->seed = ds.seed;
        part->alpha = ds.alpha;
    }
    const std::size_t kf = forget.size();
    s.retain.X = Matrix(m - kf, d);
    s.forget.X = Matrix(kf, d);
    std::size_t ri = 0, fi = 0;
    for (std::size_t i = 0; i < m; ++i) {
        Dataset& part = is_forget[i] ? s.forget : s.retain;
        std::size_t& pos = is_forget[i] ? fi : ri;
        double* dst = part.X.row(pos);
        const double* src = ds.X.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
        part.y.push_back(ds.y[i]);
        part.orig_index.push_back(ds.orig_index.empty() ? i : ds.orig_index[i]);
        ++pos;
    }
    return s;
}

inline bool datasets_equal(const Dataset& a, const Dataset& b) {
    return a.kind == b.kind && a.seed == b.seed && a.alpha == b.alpha && a.y == b.y &&
           a.X.rows == b.X.rows && a.X.cols == b.X.cols && a.X.a == b.X.a;
}

}  // namespace unlearn
