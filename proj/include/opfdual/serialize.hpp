#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfdual/dual.hpp"
#include "opfdual/mlp.hpp"

namespace opfdual {

using nlohmann::json;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
}

// ---- model ----------------------------------------------------------------

inline constexpr int kModelVersion = 1;

inline json model_to_json(const MlpModel& model, bool with_adam = true) {
    json j;
    j["version"] = kModelVersion;
    j["n_buses"] = model.n_buses;
    j["n_branches"] = model.n_branches;
    j["layer_sizes"] = model.layer_sizes;
    j["activation"] = model.activation;
    j["norm_mean"] = model.norm_mean;
    j["norm_scale"] = model.norm_scale;
    j["weights"] = model.weights;
    j["biases"] = model.biases;
    if (with_adam) {
        j["adam_state"] = {{"m_w", model.adam.m_w}, {"v_w", model.adam.v_w},
                           {"m_b", model.adam.m_b}, {"v_b", model.adam.v_b},
                           {"step", model.adam.step}};
    }
    return j;
}

inline MlpModel model_from_json(const json& j) {
    try {
        if (!j.contains("version"))
            throw IoError("model file has no version field");
        if (j.at("version").get<int>() != kModelVersion)
            throw IoError("unsupported model version " + j.at("version").dump());
        MlpModel model;
        model.n_buses = j.at("n_buses").get<std::size_t>();
        model.n_branches = j.at("n_branches").get<std::size_t>();
        model.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        model.activation = j.at("activation").get<std::string>();
        model.norm_mean = j.at("norm_mean").get<std::vector<double>>();
        model.norm_scale = j.at("norm_scale").get<std::vector<double>>();
        model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        model.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        if (j.contains("adam_state")) {
            const json& a = j.at("adam_state");
            model.adam.m_w = a.at("m_w").get<std::vector<std::vector<double>>>();
            model.adam.v_w = a.at("v_w").get<std::vector<std::vector<double>>>();
            model.adam.m_b = a.at("m_b").get<std::vector<std::vector<double>>>();
            model.adam.v_b = a.at("v_b").get<std::vector<std::vector<double>>>();
            model.adam.step = a.at("step").get<std::int64_t>();
        } else {
            model.adam.m_w.resize(model.weights.size());
            model.adam.v_w.resize(model.weights.size());
            model.adam.m_b.resize(model.weights.size());
            model.adam.v_b.resize(model.weights.size());
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                model.adam.m_w[l].assign(model.weights[l].size(), 0.0);
                model.adam.v_w[l].assign(model.weights[l].size(), 0.0);
                model.adam.m_b[l].assign(model.biases[l].size(), 0.0);
                model.adam.v_b[l].assign(model.biases[l].size(), 0.0);
            }
        }
        // structural sanity
        if (model.layer_sizes.size() != model.weights.size() + 1)
            throw IoError("model layer_sizes inconsistent with weights");
        for (std::size_t l = 0; l < model.weights.size(); ++l)
            if (model.weights[l].size() !=
                    model.layer_sizes[l] * model.layer_sizes[l + 1] ||
                model.biases[l].size() != model.layer_sizes[l + 1])
                throw IoError("model weight shapes inconsistent");
        return model;
    } catch (const json::exception& ex) {
        throw IoError(std::string("malformed model file: ") + ex.what());
    }
}

inline std::string save_model(const MlpModel& model) { return model_to_json(model).dump(); }

inline MlpModel load_model(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& ex) {
        throw IoError(std::string("malformed model file: ") + ex.what());
    }
    return model_from_json(j);
}

// ---- dual solution ---------------------------------------------------------

inline json hermitian_to_json(const HermitianMatrix& h) {
    // Upper-triangular row-major, interleaved re/im.
    std::vector<double> flat;
    flat.reserve(h.order() * (h.order() + 1));
    for (std::size_t i = 0; i < h.order(); ++i)
        for (std::size_t j = i; j < h.order(); ++j) {
            flat.push_back(h.at(i, j).real());
            flat.push_back(h.at(i, j).imag());
        }
    return json{{"order", h.order()}, {"upper_tri_re_im", flat}};
}

inline HermitianMatrix hermitian_from_json(const json& j) {
    const std::size_t n = j.at("order").get<std::size_t>();
    const auto flat = j.at("upper_tri_re_im").get<std::vector<double>>();
    if (flat.size() != n * (n + 1))
        throw IoError("hermitian matrix payload has wrong length");
    HermitianMatrix h(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = i; jj < n; ++jj) {
            h.set(i, jj, complex(flat[k], flat[k + 1]));
            k += 2;
        }
    return h;
}

inline json dual_to_json(const DualSolution& d) {
    auto cones = [](const std::vector<ConeTriple>& v) {
        json arr = json::array();
        for (const ConeTriple& c : v) arr.push_back({c.s, c.p, c.q});
        return arr;
    };
    json j;
    j["lam_p"] = d.lam_p;
    j["lam_q"] = d.lam_q;
    j["lam_p_fwd"] = d.lam_p_fwd;
    j["lam_q_fwd"] = d.lam_q_fwd;
    j["lam_p_rev"] = d.lam_p_rev;
    j["lam_q_rev"] = d.lam_q_rev;
    j["nu_fwd"] = cones(d.nu_fwd);
    j["nu_rev"] = cones(d.nu_rev);
    j["mu_pg_lo"] = d.mu_pg_lo;
    j["mu_pg_hi"] = d.mu_pg_hi;
    j["mu_qg_lo"] = d.mu_qg_lo;
    j["mu_qg_hi"] = d.mu_qg_hi;
    j["mu_w_lo"] = d.mu_w_lo;
    j["mu_w_hi"] = d.mu_w_hi;
    j["S"] = hermitian_to_json(d.S);
    j["objective"] = d.objective;
    return j;
}

inline DualSolution dual_from_json(const json& j) {
    try {
        DualSolution d;
        d.lam_p = j.at("lam_p").get<std::vector<double>>();
        d.lam_q = j.at("lam_q").get<std::vector<double>>();
        d.lam_p_fwd = j.at("lam_p_fwd").get<std::vector<double>>();
        d.lam_q_fwd = j.at("lam_q_fwd").get<std::vector<double>>();
        d.lam_p_rev = j.at("lam_p_rev").get<std::vector<double>>();
        d.lam_q_rev = j.at("lam_q_rev").get<std::vector<double>>();
        for (const char* key : {"nu_fwd", "nu_rev"}) {
            auto& dst = std::string(key) == "nu_fwd" ? d.nu_fwd : d.nu_rev;
            for (const json& c : j.at(key))
                dst.push_back({c.at(0).get<double>(), c.at(1).get<double>(),
                               c.at(2).get<double>()});
        }
        d.mu_pg_lo = j.at("mu_pg_lo").get<std::vector<double>>();
        d.mu_pg_hi = j.at("mu_pg_hi").get<std::vector<double>>();
        d.mu_qg_lo = j.at("mu_qg_lo").get<std::vector<double>>();
        d.mu_qg_hi = j.at("mu_qg_hi").get<std::vector<double>>();
        d.mu_w_lo = j.at("mu_w_lo").get<std::vector<double>>();
        d.mu_w_hi = j.at("mu_w_hi").get<std::vector<double>>();
        d.S = hermitian_from_json(j.at("S"));
        d.objective = j.value("objective", 0.0);
        return d;
    } catch (const json::exception& ex) {
        throw IoError(std::string("malformed dual solution: ") + ex.what());
    }
}

inline json report_to_json(const FeasibilityReport& r) {
    return json{{"max_eq_residual", r.max_eq_residual},
                {"worst_cone_violation", r.worst_cone_violation},
                {"min_eig_S", r.min_eig_S},
                {"pass", r.pass},
                {"worst_family", r.worst_family},
                {"tol", {{"eq", r.tol.eq}, {"cone", r.tol.cone}, {"psd", r.tol.psd}}}};
}

// ---- instances (JSON lines) -------------------------------------------------

struct TaggedInstance {
    std::string id;
    LoadInstance load;
    std::string split;  // "train" | "val" | "test"
};

inline std::string instances_to_jsonl(const std::vector<TaggedInstance>& insts) {
    std::string out;
    for (const TaggedInstance& t : insts) {
        json j{{"id", t.id}, {"p_d", t.load.p_d}, {"q_d", t.load.q_d}, {"split", t.split}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<TaggedInstance> instances_from_jsonl(const std::string& text) {
    std::vector<TaggedInstance> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            TaggedInstance t;
            t.id = j.at("id").get<std::string>();
            t.load.p_d = j.at("p_d").get<std::vector<double>>();
            t.load.q_d = j.at("q_d").get<std::vector<double>>();
            t.split = j.at("split").get<std::string>();
            out.push_back(std::move(t));
        } catch (const json::exception& ex) {
            throw IoError("instance file line " + std::to_string(line_no) + ": " +
                          ex.what());
        }
    }
    return out;
}

// ---- reference values (CSV) --------------------------------------------------

struct ReferenceValues {
    std::optional<double> z_ac_star;
    std::optional<double> z_sdp_star;
    std::optional<double> z_hat_soc;
};

// CSV columns: instance_id, z_ac_star, z_sdp_star?, z_hat_soc? (blank = absent)
inline std::map<std::string, ReferenceValues> refs_from_csv(const std::string& text) {
    std::map<std::string, ReferenceValues> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2)
            throw IoError("refs line " + std::to_string(line_no) + ": too few columns");
        ReferenceValues rv;
        auto opt = [&](std::size_t k) -> std::optional<double> {
            if (k >= cells.size() || cells[k].empty()) return std::nullopt;
            return std::stod(cells[k]);
        };
        rv.z_ac_star = opt(1);
        rv.z_sdp_star = opt(2);
        rv.z_hat_soc = opt(3);
        out[cells[0]] = rv;
    }
    return out;
}

}  // namespace opfdual
