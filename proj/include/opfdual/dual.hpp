#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfdual/grid.hpp"
#include "opfdual/hermitian.hpp"

namespace opfdual {

// One OPF instance over a fixed network: per-bus active/reactive demand.
struct LoadInstance {
    std::vector<double> p_d;
    std::vector<double> q_d;
};

struct ConeTriple {
    double s = 0, p = 0, q = 0;
};

// Every dual variable of the SDP dual of OPF. Feasibility is checked by
// verify_dual, never assumed.
struct DualSolution {
    std::vector<double> lam_p, lam_q;                          // per bus
    std::vector<double> lam_p_fwd, lam_q_fwd;                  // per branch
    std::vector<double> lam_p_rev, lam_q_rev;                  // per branch
    std::vector<ConeTriple> nu_fwd, nu_rev;                    // per branch
    std::vector<double> mu_pg_lo, mu_pg_hi, mu_qg_lo, mu_qg_hi;  // per bus
    std::vector<double> mu_w_lo, mu_w_hi;                      // per bus
    HermitianMatrix S;
    double objective = 0;

    static DualSolution zeros(std::size_t n_bus, std::size_t n_branch) {
        DualSolution d;
        d.lam_p.assign(n_bus, 0);
        d.lam_q.assign(n_bus, 0);
        d.lam_p_fwd.assign(n_branch, 0);
        d.lam_q_fwd.assign(n_branch, 0);
        d.lam_p_rev.assign(n_branch, 0);
        d.lam_q_rev.assign(n_branch, 0);
        d.nu_fwd.assign(n_branch, ConeTriple{});
        d.nu_rev.assign(n_branch, ConeTriple{});
        d.mu_pg_lo.assign(n_bus, 0);
        d.mu_pg_hi.assign(n_bus, 0);
        d.mu_qg_lo.assign(n_bus, 0);
        d.mu_qg_hi.assign(n_bus, 0);
        d.mu_w_lo.assign(n_bus, 0);
        d.mu_w_hi.assign(n_bus, 0);
        d.S = HermitianMatrix(n_bus);
        return d;
    }
};

inline void check_dimensions(const Network& net, const DualSolution& d) {
    const std::size_t n = net.n_buses(), e = net.n_branches();
    const bool ok = d.lam_p.size() == n && d.lam_q.size() == n &&
                    d.lam_p_fwd.size() == e && d.lam_q_fwd.size() == e &&
                    d.lam_p_rev.size() == e && d.lam_q_rev.size() == e &&
                    d.nu_fwd.size() == e && d.nu_rev.size() == e &&
                    d.mu_pg_lo.size() == n && d.mu_pg_hi.size() == n &&
                    d.mu_qg_lo.size() == n && d.mu_qg_hi.size() == n &&
                    d.mu_w_lo.size() == n && d.mu_w_hi.size() == n &&
                    d.S.order() == n;
    if (!ok) throw std::invalid_argument("dual solution dimensions do not match network");
}

inline void check_dimensions(const Network& net, const LoadInstance& inst) {
    if (inst.p_d.size() != net.n_buses() || inst.q_d.size() != net.n_buses())
        throw std::invalid_argument("load instance dimensions do not match network");
}

// The Hermitian operator A_R + j A_I entering the dual PSD constraint.
// A_R collects the symmetric per-bus and per-branch conductance/susceptance
// terms, A_I the skew-symmetric ones; their combination is Hermitian.
inline HermitianMatrix assemble_ar_ai(const Network& net, const DualSolution& d,
                                      bool include_mu_w = true) {
    const std::size_t n = net.n_buses();
    HermitianMatrix h(n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = -net.buses[i].shunt_g * d.lam_p[i] + net.buses[i].shunt_b * d.lam_q[i];
        if (include_mu_w) diag += d.mu_w_lo[i] - d.mu_w_hi[i];
        h.add(i, i, complex(diag, 0));
    }
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        const BranchAdmittance& br = net.branches[e];
        const std::size_t i = static_cast<std::size_t>(br.from);
        const std::size_t j = static_cast<std::size_t>(br.to);
        const double gff = br.y_ff.real(), bff = br.y_ff.imag();
        const double gft = br.y_ft.real(), bft = br.y_ft.imag();
        const double gtf = br.y_tf.real(), btf = br.y_tf.imag();
        const double gtt = br.y_tt.real(), btt = br.y_tt.imag();

        h.add(i, i, complex(d.lam_p_fwd[e] * gff - d.lam_q_fwd[e] * bff, 0));
        h.add(j, j, complex(d.lam_p_rev[e] * gtt - d.lam_q_rev[e] * btt, 0));

        // E+_ij carries 1/2 at (i,j) and (j,i); E-_ij carries +-1/2.
        const double sym = d.lam_p_fwd[e] * gft + d.lam_p_rev[e] * gtf -
                           d.lam_q_fwd[e] * bft - d.lam_q_rev[e] * btf;
        const double skew = d.lam_p_fwd[e] * bft - d.lam_p_rev[e] * btf +
                            d.lam_q_fwd[e] * gft - d.lam_q_rev[e] * gtf;
        h.add(i, j, complex(sym / 2, skew / 2));
    }
    return h;
}

inline double dual_objective(const Network& net, const LoadInstance& inst,
                             const DualSolution& d) {
    check_dimensions(net, d);
    check_dimensions(net, inst);
    double z = 0;
    for (std::size_t i = 0; i < net.n_buses(); ++i) {
        const Bus& b = net.buses[i];
        const Generator& g = net.generators[i];
        z += inst.p_d[i] * d.lam_p[i] + inst.q_d[i] * d.lam_q[i];
        z += b.v_min * b.v_min * d.mu_w_lo[i] - b.v_max * b.v_max * d.mu_w_hi[i];
        z += g.p_min * d.mu_pg_lo[i] - g.p_max * d.mu_pg_hi[i];
        z += g.q_min * d.mu_qg_lo[i] - g.q_max * d.mu_qg_hi[i];
    }
    for (std::size_t e = 0; e < net.n_branches(); ++e)
        z -= net.branches[e].s_max * (d.nu_fwd[e].s + d.nu_rev[e].s);
    return z;
}

struct VerifyTolerances {
    double eq = 1e-8;
    double cone = 1e-8;
    double psd = 1e-8;  // accept min_eig(S) >= -psd
};

struct FeasibilityReport {
    double max_eq_residual = 0;
    double worst_cone_violation = 0;
    double min_eig_S = 0;
    bool pass = false;
    VerifyTolerances tol;
    std::string worst_family;  // constraint family of the largest violation
};

inline FeasibilityReport verify_dual(const Network& net, const LoadInstance& inst,
                                     const DualSolution& d,
                                     VerifyTolerances tol = {}) {
    check_dimensions(net, d);
    check_dimensions(net, inst);
    FeasibilityReport rep;
    rep.tol = tol;

    double worst_eq = 0;
    std::string worst_eq_family = "none";
    auto track_eq = [&](double r, const std::string& family) {
        r = std::abs(r);
        if (r > worst_eq) {
            worst_eq = r;
            worst_eq_family = family;
        }
    };

    for (std::size_t i = 0; i < net.n_buses(); ++i) {
        track_eq(d.lam_p[i] + d.mu_pg_lo[i] - d.mu_pg_hi[i] - net.generators[i].cost,
                 "active_dispatch");
        track_eq(d.lam_q[i] + d.mu_qg_lo[i] - d.mu_qg_hi[i], "reactive_dispatch");
    }
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        const std::size_t i = static_cast<std::size_t>(net.branches[e].from);
        const std::size_t j = static_cast<std::size_t>(net.branches[e].to);
        track_eq(-d.lam_p[i] - d.lam_p_fwd[e] + d.nu_fwd[e].p, "flow_fwd_p");
        track_eq(-d.lam_q[i] - d.lam_q_fwd[e] + d.nu_fwd[e].q, "flow_fwd_q");
        track_eq(-d.lam_p[j] - d.lam_p_rev[e] + d.nu_rev[e].p, "flow_rev_p");
        track_eq(-d.lam_q[j] - d.lam_q_rev[e] + d.nu_rev[e].q, "flow_rev_q");
    }

    // PSD linking: A_R + j A_I + S = 0, entrywise.
    const HermitianMatrix a = assemble_ar_ai(net, d, true);
    for (std::size_t i = 0; i < net.n_buses(); ++i)
        for (std::size_t j = i; j < net.n_buses(); ++j)
            track_eq(std::abs(a.at(i, j) + d.S.at(i, j)), "psd_linking");

    double worst_cone = 0;
    std::string worst_cone_family = "none";
    auto track_cone = [&](double v, const std::string& family) {
        if (v > worst_cone) {
            worst_cone = v;
            worst_cone_family = family;
        }
    };
    for (std::size_t e = 0; e < net.n_branches(); ++e) {
        track_cone(std::hypot(d.nu_fwd[e].p, d.nu_fwd[e].q) - d.nu_fwd[e].s, "cone_fwd");
        track_cone(std::hypot(d.nu_rev[e].p, d.nu_rev[e].q) - d.nu_rev[e].s, "cone_rev");
    }
    for (std::size_t i = 0; i < net.n_buses(); ++i) {
        track_cone(-d.mu_pg_lo[i], "sign_mu_pg");
        track_cone(-d.mu_pg_hi[i], "sign_mu_pg");
        track_cone(-d.mu_qg_lo[i], "sign_mu_qg");
        track_cone(-d.mu_qg_hi[i], "sign_mu_qg");
        track_cone(-d.mu_w_lo[i], "sign_mu_w");
        track_cone(-d.mu_w_hi[i], "sign_mu_w");
    }
    worst_cone = std::max(worst_cone, 0.0);

    rep.max_eq_residual = worst_eq;
    rep.worst_cone_violation = worst_cone;
    rep.min_eig_S = min_eig(d.S).lambda_min;
    rep.pass = worst_eq <= tol.eq && worst_cone <= tol.cone && rep.min_eig_S >= -tol.psd;
    if (worst_eq > tol.eq)
        rep.worst_family = worst_eq_family;
    else if (worst_cone > tol.cone)
        rep.worst_family = worst_cone_family;
    else if (rep.min_eig_S < -tol.psd)
        rep.worst_family = "psd_S";
    else
        rep.worst_family = "none";
    return rep;
}

struct GapMetrics {
    std::optional<double> gap;         // (z_ac* - z) / z_ac*
    std::optional<double> gap_closed;  // (z_sdp_hat - z_soc_hat) / (z_sdp* - z_soc_hat)
};

inline GapMetrics duality_gap_metrics(std::optional<double> z_ac_star,
                                      std::optional<double> z_sdp_star,
                                      double z_hat_sdp,
                                      std::optional<double> z_hat_soc) {
    GapMetrics m;
    if (z_ac_star && *z_ac_star > 0) m.gap = (*z_ac_star - z_hat_sdp) / *z_ac_star;
    if (z_sdp_star && z_hat_soc && *z_sdp_star != *z_hat_soc)
        m.gap_closed = (z_hat_sdp - *z_hat_soc) / (*z_sdp_star - *z_hat_soc);
    return m;
}

// Geometric mean in log space. Nonpositive input is an error, except that a
// zero yields zero (gap sets can contain exact zeros).
inline double geometric_mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("geometric_mean of empty set");
    double logsum = 0;
    for (double x : xs) {
        if (x < 0) throw std::invalid_argument("geometric_mean requires nonnegative inputs");
        if (x == 0) return 0.0;
        logsum += std::log(x);
    }
    return std::exp(logsum / static_cast<double>(xs.size()));
}

inline double arithmetic_mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("arithmetic_mean of empty set");
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double population_stddev(const std::vector<double>& xs) {
    const double m = arithmetic_mean(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

// "mean (std)" cell, three decimals, as used in results tables.
inline std::string format_mean_std(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f (%.3f)", mean, std);
    return buf;
}

inline std::string format_mean_std(const std::vector<double>& xs, bool geometric = false) {
    const double m = geometric ? geometric_mean(xs) : arithmetic_mean(xs);
    return format_mean_std(m, population_stddev(xs));
}

}  // namespace opfdual
