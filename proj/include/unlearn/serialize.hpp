#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "unlearn/common.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/kkt.hpp"
#include "unlearn/model.hpp"
#include "unlearn/trainer.hpp"
#include "unlearn/unlearner.hpp"

namespace unlearn {

using json = nlohmann::json;

inline json dataset_to_json(const Dataset& ds) {
    json j;
    j["kind"] = to_string(ds.kind);
    j["m"] = ds.m();
    j["d"] = ds.d();
    j["seed"] = ds.seed;
    if (ds.alpha.has_value())
        j["alpha"] = *ds.alpha;
    else
        j["alpha"] = nullptr;
    j["labels"] = ds.y;
    json rows = json::array();
    for (std::size_t i = 0; i < ds.m(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < ds.d(); ++k) row.push_back(ds.X.at(i, k));
        rows.push_back(std::move(row));
    }
    j["X"] = std::move(rows);
    return j;
}

inline Dataset dataset_from_json(const json& j) {
    Dataset ds;
    try {
        ds.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
        const auto m = j.at("m").get<std::size_t>();
        const auto d = j.at("d").get<std::size_t>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("alpha") && !j.at("alpha").is_null())
            ds.alpha = j.at("alpha").get<double>();
        ds.y = j.at("labels").get<std::vector<int>>();
        const auto& rows = j.at("X");
        if (!rows.is_array() || rows.size() != m)
            throw ParseError("dataset field 'X' must hold m rows");
        ds.X = Matrix(m, d);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& row = rows.at(i);
            if (!row.is_array() || row.size() != d)
                throw ParseError("dataset row " + std::to_string(i) + " must hold d reals");
            for (std::size_t k = 0; k < d; ++k) ds.X.at(i, k) = row.at(k).get<double>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset: ") + e.what());
    }
    if (ds.m() < 2 || ds.d() < 1) throw ValidationError("dataset: needs m >= 2 and d >= 1");
    if (ds.y.size() != ds.m()) throw ValidationError("dataset: labels length must equal m");
    for (std::size_t i = 0; i < ds.y.size(); ++i)
        if (ds.y[i] != 1 && ds.y[i] != -1)
            throw ValidationError("dataset: label at row " + std::to_string(i) +
                                  " is not +1 or -1");
    if (ds.kind == DatasetKind::Orthonormal && ds.m() > ds.d())
        throw ValidationError("dataset: orthonormal kind requires m <= d");
    detail::fill_identity_index(ds);
    return ds;
}

inline json params_to_json(const ModelParams& p) {
    json j;
    j["variant"] = to_string(p.kind);
    j["d"] = p.d;
    if (p.kind == ModelKind::Linear) {
        j["w"] = p.theta;
        return j;
    }
    j["n"] = p.n;
    j["u"] = p.u;
    json rows = json::array();
    for (std::size_t q = 0; q < p.n; ++q) {
        json row = json::array();
        const double* wq = p.neuron(q);
        for (std::size_t k = 0; k < p.d; ++k) row.push_back(wq[k]);
        rows.push_back(std::move(row));
    }
    j["W"] = std::move(rows);
    return j;
}

inline ModelParams params_from_json(const json& j) {
    try {
        const auto variant = model_kind_from_string(j.at("variant").get<std::string>());
        if (variant == ModelKind::Linear) {
            ModelParams p = make_linear(j.at("w").get<Vec>());
            if (j.contains("d") && j.at("d").get<std::size_t>() != p.d)
                throw ValidationError("params: field 'd' disagrees with w length");
            return p;
        }
        const auto d = j.at("d").get<std::size_t>();
        const auto n = j.at("n").get<std::size_t>();
        Vec u = j.at("u").get<Vec>();
        if (u.size() != n) throw ValidationError("params: u length must equal n");
        Matrix W(n, d);
        const auto& rows = j.at("W");
        if (!rows.is_array() || rows.size() != n)
            throw ParseError("params field 'W' must hold n rows");
        for (std::size_t q = 0; q < n; ++q) {
            const auto& row = rows.at(q);
            if (!row.is_array() || row.size() != d)
                throw ParseError("params row " + std::to_string(q) + " must hold d reals");
            for (std::size_t k = 0; k < d; ++k) W.at(q, k) = row.at(k).get<double>();
        }
        return make_twolayer(std::move(W), std::move(u));
    } catch (const json::exception& e) {
        throw ParseError(std::string("params: ") + e.what());
    }
}

inline json certificate_to_json(const KktCertificate& c) {
    json j;
    j["lambda"] = c.lambda;
    j["eps"] = c.eps;
    j["delta"] = c.delta;
    j["gamma"] = c.gamma;
    j["margins"] = c.margins;
    j["mode"] = to_string(c.mode);
    j["kappa"] = c.kappa;
    return j;
}

inline json assumption_report_to_json(const AssumptionReport& r, std::size_t n = 0) {
    json j;
    j["psi"] = r.psi;
    j["phi"] = r.phi;
    j["m"] = r.m;
    j["eps_d_linear"] = r.eps_d_linear();
    if (n > 0) j["eps_d_twolayer"] = r.eps_d_twolayer(n);
    return j;
}

inline json train_report_to_json(const TrainReport& r) {
    json j;
    j["final_loss"] = r.final_loss;
    j["epochs_run"] = r.epochs_run;
    j["min_margin"] = r.min_margin;
    j["loss_curve"] = r.loss_curve;
    return j;
}

inline json unlearn_result_to_json(const UnlearnResult& r) {
    json j;
    j["forget"] = r.forget;
    j["beta"] = r.beta;
    j["lambda_forget"] = r.lambda_forget;
    j["c"] = r.c;
    j["rescale_factor"] = r.rescale_factor;
    j["theta_hat_norm"] = norm2(r.theta_hat.theta);
    if (r.theta_tilde.has_value()) j["theta_tilde_norm"] = norm2(r.theta_tilde->theta);
    return j;
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw Error("write to '" + path + "' failed");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json_file(const std::string& path) {
    const std::string body = read_text_file(path);
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    write_text_file(path, dataset_to_json(ds).dump(2) + "\n");
}

inline Dataset load_dataset(const std::string& path) {
    return dataset_from_json(parse_json_file(path));
}

inline void save_params(const ModelParams& p, const std::string& path) {
    write_text_file(path, params_to_json(p).dump(2) + "\n");
}

inline ModelParams load_params(const std::string& path) {
    return params_from_json(parse_json_file(path));
}

}  // namespace unlearn
