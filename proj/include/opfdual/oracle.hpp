#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "opfdual/dual.hpp"
#include "opfdual/grid.hpp"
#include "opfdual/hermitian.hpp"

namespace opfdual {

// A candidate AC operating point. Flows are always derived from (v, theta).
struct AcPoint {
    std::vector<double> v;      // voltage magnitudes
    std::vector<double> theta;  // angles, radians, reference bus 0 at 0
    std::vector<double> p_g, q_g;
};

struct BranchFlow {
    complex fwd, rev;
};

inline std::vector<BranchFlow> branch_flows(const Network& net, const AcPoint& pt) {
    std::vector<BranchFlow> flows(net.n_branches());
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        const BranchAdmittance& br = net.branches[e];
        const std::size_t i = static_cast<std::size_t>(br.from);
        const std::size_t j = static_cast<std::size_t>(br.to);
        const complex vi = std::polar(pt.v[i], pt.theta[i]);
        const complex vj = std::polar(pt.v[j], pt.theta[j]);
        flows[e].fwd = std::conj(br.y_ff) * std::norm(vi) + std::conj(br.y_ft) * vi * std::conj(vj);
        flows[e].rev = std::conj(br.y_tt) * std::norm(vj) + std::conj(br.y_tf) * vj * std::conj(vi);
    }
    return flows;
}

struct AcResiduals {
    double max_balance_mismatch = 0;  // worst |p| or |q| bus mismatch
    double max_thermal_violation = 0;
    double max_bound_violation = 0;  // v, p_g, q_g box violations
    std::vector<double> p_mismatch, q_mismatch;
};

inline AcResiduals ac_residuals(const Network& net, const LoadInstance& inst,
                                const AcPoint& pt) {
    const std::size_t n = net.n_buses();
    AcResiduals res;
    res.p_mismatch.assign(n, 0.0);
    res.q_mismatch.assign(n, 0.0);

    const auto flows = branch_flows(net, pt);
    for (std::size_t i = 0; i < n; ++i) {
        const Bus& b = net.buses[i];
        const double v2 = pt.v[i] * pt.v[i];
        res.p_mismatch[i] = pt.p_g[i] - inst.p_d[i] - b.shunt_g * v2;
        res.q_mismatch[i] = pt.q_g[i] - inst.q_d[i] + b.shunt_b * v2;
    }
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        const BranchAdmittance& br = net.branches[e];
        res.p_mismatch[br.from] -= flows[e].fwd.real();
        res.q_mismatch[br.from] -= flows[e].fwd.imag();
        res.p_mismatch[br.to] -= flows[e].rev.real();
        res.q_mismatch[br.to] -= flows[e].rev.imag();
        res.max_thermal_violation =
            std::max({res.max_thermal_violation, std::abs(flows[e].fwd) - br.s_max,
                      std::abs(flows[e].rev) - br.s_max});
    }
    for (std::size_t i = 0; i < n; ++i) {
        res.max_balance_mismatch = std::max(
            {res.max_balance_mismatch, std::abs(res.p_mismatch[i]), std::abs(res.q_mismatch[i])});
        const Bus& b = net.buses[i];
        const Generator& g = net.generators[i];
        res.max_bound_violation =
            std::max({res.max_bound_violation, b.v_min - pt.v[i], pt.v[i] - b.v_max,
                      g.p_min - pt.p_g[i], pt.p_g[i] - g.p_max, g.q_min - pt.q_g[i],
                      pt.q_g[i] - g.q_max});
    }
    res.max_thermal_violation = std::max(res.max_thermal_violation, 0.0);
    res.max_bound_violation = std::max(res.max_bound_violation, 0.0);
    return res;
}

// Dispatch forced by power balance at (v, theta), clamped into generator
// boxes. A clamp surfaces as a balance mismatch in ac_residuals.
inline AcPoint dispatch_by_balance(const Network& net, const LoadInstance& inst,
                                   std::vector<double> v, std::vector<double> theta) {
    AcPoint pt;
    pt.v = std::move(v);
    pt.theta = std::move(theta);
    pt.p_g.assign(net.n_buses(), 0.0);
    pt.q_g.assign(net.n_buses(), 0.0);
    const auto flows = branch_flows(net, pt);
    std::vector<double> need_p(net.n_buses()), need_q(net.n_buses());
    for (std::size_t i = 0; i < net.n_buses(); ++i) {
        const double v2 = pt.v[i] * pt.v[i];
        need_p[i] = inst.p_d[i] + net.buses[i].shunt_g * v2;
        need_q[i] = inst.q_d[i] - net.buses[i].shunt_b * v2;
    }
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        need_p[net.branches[e].from] += flows[e].fwd.real();
        need_q[net.branches[e].from] += flows[e].fwd.imag();
        need_p[net.branches[e].to] += flows[e].rev.real();
        need_q[net.branches[e].to] += flows[e].rev.imag();
    }
    for (std::size_t i = 0; i < net.n_buses(); ++i) {
        const Generator& g = net.generators[i];
        pt.p_g[i] = std::clamp(need_p[i], g.p_min, g.p_max);
        pt.q_g[i] = std::clamp(need_q[i], g.q_min, g.q_max);
    }
    return pt;
}

struct GridConfig {
    std::size_t v_steps = 9;
    std::size_t theta_steps = 9;
    double angle_box = M_PI / 3;
    double coarse_tol = 1e-3;
    double refine_tol = 1e-4;
    std::size_t refinements = 2;
};

struct OracleResult {
    bool feasible = false;
    double best_cost = std::numeric_limits<double>::infinity();
    AcPoint best_point;
    double tolerance = 0;  // feasibility tolerance at which best_point was accepted
    GridConfig cfg;
};

namespace detail {

struct GridAxis {
    double lo = 0, hi = 0;
    std::size_t steps = 1;
    double at(std::size_t k) const {
        return steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) /
                                     static_cast<double>(steps - 1);
    }
    double spacing() const {
        return steps <= 1 ? 0.0 : (hi - lo) / static_cast<double>(steps - 1);
    }
};

}  // namespace detail

// Exhaustive grid minimizer for tiny systems: the reference angle is fixed,
// dispatch comes from power balance, and each refinement pass shrinks the
// grid around the incumbent (which is always carried over, so the reported
// cost is non-increasing across passes).
inline OracleResult brute_force_opf(const Network& net, const LoadInstance& inst,
                                    GridConfig cfg = {}) {
    const std::size_t n = net.n_buses();
    if (n > 3) throw std::invalid_argument("brute_force_opf is guarded to <= 3 buses");
    if (n == 0) throw std::invalid_argument("empty network");

    OracleResult result;
    result.cfg = cfg;

    std::vector<detail::GridAxis> v_axes(n), th_axes(n);
    for (std::size_t i = 0; i < n; ++i) {
        v_axes[i] = {net.buses[i].v_min, net.buses[i].v_max, cfg.v_steps};
        th_axes[i] = i == 0 ? detail::GridAxis{0, 0, 1}
                            : detail::GridAxis{-cfg.angle_box, cfg.angle_box,
                                               cfg.theta_steps};
    }

    auto run_pass = [&](double tol) {
        std::vector<std::size_t> idx(2 * n, 0);
        std::vector<double> v(n), theta(n);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = v_axes[i].at(idx[i]);
                theta[i] = th_axes[i].at(idx[n + i]);
            }
            AcPoint pt = dispatch_by_balance(net, inst, v, theta);
            const AcResiduals res = ac_residuals(net, inst, pt);
            if (res.max_balance_mismatch <= tol && res.max_thermal_violation <= tol &&
                res.max_bound_violation <= tol) {
                double cost = 0;
                for (std::size_t i = 0; i < n; ++i)
                    cost += net.generators[i].cost * pt.p_g[i];
                if (cost < result.best_cost) {
                    result.best_cost = cost;
                    result.best_point = pt;
                    result.feasible = true;
                    result.tolerance = tol;
                }
            }
            // odometer over v indices then theta indices
            std::size_t d = 0;
            for (; d < 2 * n; ++d) {
                const std::size_t cap = d < n ? v_axes[d].steps : th_axes[d - n].steps;
                if (++idx[d] < cap) break;
                idx[d] = 0;
            }
            if (d == 2 * n) break;
        }
    };

    run_pass(cfg.coarse_tol);

    for (std::size_t pass = 0; pass < cfg.refinements && result.feasible; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            const double hv = std::max(v_axes[i].spacing(), 1e-12);
            v_axes[i].lo = std::max(net.buses[i].v_min, result.best_point.v[i] - hv);
            v_axes[i].hi = std::min(net.buses[i].v_max, result.best_point.v[i] + hv);
            if (i > 0) {
                const double ht = std::max(th_axes[i].spacing(), 1e-12);
                th_axes[i].lo = std::max(-cfg.angle_box, result.best_point.theta[i] - ht);
                th_axes[i].hi = std::min(cfg.angle_box, result.best_point.theta[i] + ht);
            }
        }
        run_pass(cfg.refine_tol);
    }
    return result;
}

// Rank-one SDP certificate W = V V^dagger from an AC point.
inline HermitianMatrix rank1_certificate(const AcPoint& pt) {
    const std::size_t n = pt.v.size();
    HermitianMatrix w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const complex vi = std::polar(pt.v[i], pt.theta[i]);
        for (std::size_t j = i; j < n; ++j) {
            const complex vj = std::polar(pt.v[j], pt.theta[j]);
            w.set(i, j, vi * std::conj(vj));
        }
    }
    return w;
}

}  // namespace opfdual
