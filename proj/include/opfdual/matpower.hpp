#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfdual/grid.hpp"

namespace opfdual {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raw tables of a MATPOWER case, rows kept in file order.
struct RawCase {
    double base_mva = 0;
    std::vector<std::vector<double>> bus;
    std::vector<std::vector<double>> gen;
    std::vector<std::vector<double>> branch;
    std::vector<std::vector<double>> gencost;
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
    auto pos = line.find('%');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline double parse_number(const std::string& tok, int line_no) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError("line " + std::to_string(line_no) +
                         ": malformed number '" + tok + "'");
    return v;
}

}  // namespace detail

// Tolerant line-oriented extractor for the mpc.baseMVA / bus / gen / branch /
// gencost assignments. Not a MATLAB interpreter: matrix entries must be plain
// numeric literals.
inline RawCase parse_case(const std::string& text) {
    RawCase rc;
    bool saw_base = false;
    std::map<std::string, std::vector<std::vector<double>>*> tables = {
        {"bus", &rc.bus}, {"gen", &rc.gen},
        {"branch", &rc.branch}, {"gencost", &rc.gencost}};
    std::map<std::string, bool> seen = {
        {"bus", false}, {"gen", false}, {"branch", false}, {"gencost", false}};

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<std::vector<double>>* active = nullptr;  // table being filled
    bool skipping_block = false;                         // unknown matrix/cell body

    auto consume_rows = [&](const std::string& body) {
        // Rows are ';'-separated runs of whitespace/comma-separated numbers.
        std::string chunk;
        for (std::size_t k = 0; k <= body.size(); ++k) {
            const bool row_end = k == body.size() || body[k] == ';';
            if (!row_end) {
                chunk += body[k] == ',' ? ' ' : body[k];
                continue;
            }
            std::istringstream rs(chunk);
            std::vector<double> row;
            std::string tok;
            while (rs >> tok) row.push_back(detail::parse_number(tok, line_no));
            if (!row.empty()) active->push_back(std::move(row));
            chunk.clear();
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::string s = detail::strip_comment(line);

        if (skipping_block) {
            if (s.find("];") != std::string::npos || s.find("};") != std::string::npos)
                skipping_block = false;
            continue;
        }
        if (active) {
            auto close = s.find("];");
            if (close != std::string::npos) {
                consume_rows(s.substr(0, close));
                active = nullptr;
            } else {
                consume_rows(s);
            }
            continue;
        }

        auto mpc = s.find("mpc.");
        if (mpc == std::string::npos) continue;
        auto eq = s.find('=', mpc);
        if (eq == std::string::npos) continue;
        std::string name = s.substr(mpc + 4, eq - (mpc + 4));
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
            name.pop_back();
        std::string rhs = s.substr(eq + 1);

        if (name == "baseMVA") {
            auto semi = rhs.find(';');
            if (semi != std::string::npos) rhs = rhs.substr(0, semi);
            std::istringstream rs(rhs);
            std::string tok;
            rs >> tok;
            rc.base_mva = detail::parse_number(tok, line_no);
            saw_base = true;
            continue;
        }

        auto open = rhs.find_first_of("[{");
        if (open == std::string::npos) continue;  // scalar/string field, ignore
        auto it = tables.find(name);
        if (it == tables.end()) {
            if (rhs.find("];", open) == std::string::npos &&
                rhs.find("};", open) == std::string::npos)
                skipping_block = true;
            continue;
        }
        seen[name] = true;
        active = it->second;
        std::string body = rhs.substr(open + 1);
        auto close = body.find("];");
        if (close != std::string::npos) {
            consume_rows(body.substr(0, close));
            active = nullptr;
        } else {
            consume_rows(body);
        }
    }

    if (!saw_base) throw ParseError("missing mpc.baseMVA");
    for (const auto& [name, was_seen] : seen)
        if (!was_seen) throw ParseError("missing table mpc." + name);
    return rc;
}

// Column indices of the MATPOWER tables we read.
namespace col {
enum Bus { BUS_I = 0, BUS_TYPE, PD, QD, GS, BS, AREA, VM, VA, BASE_KV, ZONE, VMAX, VMIN };
enum Gen { GEN_BUS = 0, PG, QG, QMAX, QMIN, VG, MBASE, GEN_STATUS, PMAX, PMIN };
enum Branch { F_BUS = 0, T_BUS, BR_R, BR_X, BR_B, RATE_A, RATE_B, RATE_C,
              TAP, SHIFT, BR_STATUS, ANGMIN, ANGMAX };
}  // namespace col

// Linear cost coefficient ($/MWh) from a gencost row. Accepts the standard
// MATPOWER layout (model, startup, shutdown, n, c_{n-1}..c_0) and the compact
// (model, n, c_{n-1}..c_0) layout. Polynomial model 2 only, degree <= 1; a
// constant term is tolerated and ignored.
inline double linear_cost_coefficient(const std::vector<double>& row, std::size_t gen_idx) {
    auto fail = [&](const std::string& msg) -> double {
        throw ParseError("gencost row " + std::to_string(gen_idx) + ": " + msg);
    };
    if (row.size() < 3) return fail("too few columns");
    const int model = static_cast<int>(row[0]);
    if (model != 2) return fail("piecewise-linear cost (model 1) not supported");

    std::size_t ncost_idx;
    if (row.size() >= 4 && row.size() == 4 + static_cast<std::size_t>(row[3]))
        ncost_idx = 3;
    else if (row.size() == 2 + static_cast<std::size_t>(row[1]))
        ncost_idx = 1;
    else
        return fail("column count does not match ncost");
    const int ncost = static_cast<int>(row[ncost_idx]);
    const double* c = row.data() + ncost_idx + 1;

    if (ncost > 3) return fail("nonlinear cost: polynomial degree > 2 not supported");
    if (ncost == 3) {
        if (c[0] != 0.0) return fail("nonlinear cost: nonzero quadratic coefficient");
        return c[1];
    }
    if (ncost == 2) return c[0];
    if (ncost == 1) return 0.0;  // constant cost only
    return fail("empty cost polynomial");
}

inline Network lower_case(const RawCase& rc) {
    if (rc.base_mva <= 0) throw ParseError("baseMVA must be positive");
    Network net;
    net.base_mva = rc.base_mva;
    const double base = rc.base_mva;

    std::map<int, int> bus_index;  // file bus number -> dense index
    for (std::size_t i = 0; i < rc.bus.size(); ++i) {
        const auto& row = rc.bus[i];
        if (row.size() < 13)
            throw ParseError("bus row " + std::to_string(i) + ": expected 13 columns");
        const int number = static_cast<int>(row[col::BUS_I]);
        if (bus_index.count(number))
            throw ParseError("duplicate bus number " + std::to_string(number));
        bus_index[number] = static_cast<int>(i);
        Bus b;
        b.id = static_cast<int>(i);
        b.shunt_g = row[col::GS] / base;
        b.shunt_b = row[col::BS] / base;
        b.v_max = row[col::VMAX];
        b.v_min = row[col::VMIN];
        net.buses.push_back(b);
        net.ref_p.push_back(row[col::PD] / base);
        net.ref_q.push_back(row[col::QD] / base);
    }

    // Every bus carries exactly one generator; buses without an in-service
    // physical generator get a zero-bound dummy.
    net.generators.assign(net.buses.size(), Generator{});
    for (std::size_t i = 0; i < net.generators.size(); ++i)
        net.generators[i].bus = static_cast<int>(i);
    std::vector<bool> has_gen(net.buses.size(), false);
    if (rc.gencost.size() != rc.gen.size())
        throw ParseError("gencost row count " + std::to_string(rc.gencost.size()) +
                         " does not match gen row count " + std::to_string(rc.gen.size()));
    for (std::size_t g = 0; g < rc.gen.size(); ++g) {
        const auto& row = rc.gen[g];
        if (row.size() < 10)
            throw ParseError("gen row " + std::to_string(g) + ": expected >= 10 columns");
        if (row[col::GEN_STATUS] == 0.0) continue;
        auto it = bus_index.find(static_cast<int>(row[col::GEN_BUS]));
        if (it == bus_index.end())
            throw ParseError("gen row " + std::to_string(g) + ": unknown bus " +
                             std::to_string(static_cast<int>(row[col::GEN_BUS])));
        const int bi = it->second;
        if (has_gen[bi])
            throw ParseError("two in-service generators at bus " +
                             std::to_string(static_cast<int>(row[col::GEN_BUS])));
        has_gen[bi] = true;
        Generator& gen = net.generators[bi];
        gen.bus = bi;
        gen.p_max = row[col::PMAX] / base;
        gen.p_min = row[col::PMIN] / base;
        gen.q_max = row[col::QMAX] / base;
        gen.q_min = row[col::QMIN] / base;
        gen.cost = linear_cost_coefficient(rc.gencost[g], g) * base;  // $/pu-h
    }

    // "No thermal limit" sentinel: rateA = 0 is replaced by a bound well above
    // any flow a bounded instance can carry, keeping Model 3 coefficients finite.
    double total_demand = 0;
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        total_demand += std::hypot(net.ref_p[i], net.ref_q[i]);
    const double s_sentinel = total_demand > 0 ? 10.0 * total_demand : 100.0;

    for (std::size_t e = 0; e < rc.branch.size(); ++e) {
        const auto& row = rc.branch[e];
        if (row.size() < 11)
            throw ParseError("branch row " + std::to_string(e) + ": expected >= 11 columns");
        if (row[col::BR_STATUS] == 0.0) continue;
        auto fi = bus_index.find(static_cast<int>(row[col::F_BUS]));
        auto ti = bus_index.find(static_cast<int>(row[col::T_BUS]));
        if (fi == bus_index.end() || ti == bus_index.end())
            throw ParseError("branch row " + std::to_string(e) + ": unknown endpoint bus");
        const double tap = row[col::TAP] == 0.0 ? 1.0 : row[col::TAP];
        const double shift = row[col::SHIFT] * M_PI / 180.0;
        BranchAdmittance ba;
        try {
            ba = build_branch_admittance(row[col::BR_R], row[col::BR_X], row[col::BR_B],
                                         tap, shift);
        } catch (const std::invalid_argument& ex) {
            throw ParseError("branch row " + std::to_string(e) + ": " + ex.what());
        }
        ba.from = fi->second;
        ba.to = ti->second;
        ba.s_max = row[col::RATE_A] == 0.0 ? s_sentinel : row[col::RATE_A] / base;
        net.branches.push_back(ba);
        // angmin/angmax (columns 12-13) are parsed but not modeled.
    }

    auto violations = validate_network(net);
    if (!violations.empty()) {
        std::string msg = "lowered network invalid:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ParseError(msg);
    }
    return net;
}

inline Network parse_network(const std::string& text) { return lower_case(parse_case(text)); }

}  // namespace opfdual
