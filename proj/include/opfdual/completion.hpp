#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "opfdual/dual.hpp"
#include "opfdual/grid.hpp"
#include "opfdual/hermitian.hpp"

namespace opfdual {

// Raw predictor output: the freely chosen dual variables. No sign or cone
// restriction; making them feasible is the completion's job.
struct Prediction {
    std::vector<double> lam_p, lam_q;              // per bus
    std::vector<double> nu_p_fwd, nu_q_fwd;        // per branch
    std::vector<double> nu_p_rev, nu_q_rev;        // per branch

    static Prediction zeros(std::size_t n_bus, std::size_t n_branch) {
        Prediction p;
        p.lam_p.assign(n_bus, 0);
        p.lam_q.assign(n_bus, 0);
        p.nu_p_fwd.assign(n_branch, 0);
        p.nu_q_fwd.assign(n_branch, 0);
        p.nu_p_rev.assign(n_branch, 0);
        p.nu_q_rev.assign(n_branch, 0);
        return p;
    }

    std::size_t size() const {
        return lam_p.size() + lam_q.size() + nu_p_fwd.size() + nu_q_fwd.size() +
               nu_p_rev.size() + nu_q_rev.size();
    }
};

// Intermediates of the forward completion retained for the backward pass.
struct CompletionTape {
    HermitianMatrix S_hat;
    double delta = 0;  // min(0, lambda_min(S_hat)) <= 0
    MinEigPair min_pair;
    std::vector<std::uint8_t> mask_pg_lo, mask_pg_hi;  // active ReLU branches
    std::vector<std::uint8_t> mask_qg_lo, mask_qg_hi;
    std::vector<double> cone_norm_fwd, cone_norm_rev;
    bool degenerate = false;  // min-eig gap below 1e-9
};

struct CompletionResult {
    DualSolution dual;
    CompletionTape tape;
};

// Turns an arbitrary prediction into a dual-feasible solution:
//   1. branch multipliers from the flow-linking equalities,
//   2. cone apexes set tight (their objective coefficient is -s_max <= 0),
//   3. dispatch bound multipliers from the objective-maximal ReLU split,
//   4. PSD repair: shift S_hat by its negative eigenvalue floor, paid for
//      through the upper voltage-bound multipliers.
inline CompletionResult complete(const Network& net, const Prediction& pred) {
    const std::size_t n = net.n_buses(), m = net.n_branches();
    if (pred.lam_p.size() != n || pred.lam_q.size() != n || pred.nu_p_fwd.size() != m ||
        pred.nu_q_fwd.size() != m || pred.nu_p_rev.size() != m || pred.nu_q_rev.size() != m)
        throw std::invalid_argument("prediction dimensions do not match network");

    CompletionResult out;
    DualSolution& d = out.dual;
    CompletionTape& tape = out.tape;
    d = DualSolution::zeros(n, m);
    d.lam_p = pred.lam_p;
    d.lam_q = pred.lam_q;

    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t i = static_cast<std::size_t>(net.branches[e].from);
        const std::size_t j = static_cast<std::size_t>(net.branches[e].to);
        d.lam_p_fwd[e] = pred.nu_p_fwd[e] - pred.lam_p[i];
        d.lam_q_fwd[e] = pred.nu_q_fwd[e] - pred.lam_q[i];
        d.lam_p_rev[e] = pred.nu_p_rev[e] - pred.lam_p[j];
        d.lam_q_rev[e] = pred.nu_q_rev[e] - pred.lam_q[j];

        d.nu_fwd[e] = {std::hypot(pred.nu_p_fwd[e], pred.nu_q_fwd[e]),
                       pred.nu_p_fwd[e], pred.nu_q_fwd[e]};
        d.nu_rev[e] = {std::hypot(pred.nu_p_rev[e], pred.nu_q_rev[e]),
                       pred.nu_p_rev[e], pred.nu_q_rev[e]};
    }
    tape.cone_norm_fwd.resize(m);
    tape.cone_norm_rev.resize(m);
    for (std::size_t e = 0; e < m; ++e) {
        tape.cone_norm_fwd[e] = d.nu_fwd[e].s;
        tape.cone_norm_rev[e] = d.nu_rev[e].s;
    }

    tape.mask_pg_lo.resize(n);
    tape.mask_pg_hi.resize(n);
    tape.mask_qg_lo.resize(n);
    tape.mask_qg_hi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = net.generators[i].cost;
        d.mu_pg_lo[i] = std::max(c - d.lam_p[i], 0.0);
        d.mu_pg_hi[i] = std::max(d.lam_p[i] - c, 0.0);
        d.mu_qg_lo[i] = std::max(-d.lam_q[i], 0.0);
        d.mu_qg_hi[i] = std::max(d.lam_q[i], 0.0);
        tape.mask_pg_lo[i] = c - d.lam_p[i] > 0;
        tape.mask_pg_hi[i] = d.lam_p[i] - c > 0;
        tape.mask_qg_lo[i] = -d.lam_q[i] > 0;
        tape.mask_qg_hi[i] = d.lam_q[i] > 0;
    }

    // S_hat is the operator with the voltage-bound multipliers zeroed out.
    const HermitianMatrix a = assemble_ar_ai(net, d, false);
    HermitianMatrix s_hat(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) s_hat.set(i, j, -a.at(i, j));

    tape.min_pair = min_eig(s_hat);
    tape.delta = std::min(0.0, tape.min_pair.lambda_min);
    tape.degenerate = tape.min_pair.gap < 1e-9;
    tape.S_hat = s_hat;

    d.S = herm_add_scaled(s_hat, -tape.delta);
    for (std::size_t i = 0; i < n; ++i) {
        d.mu_w_lo[i] = 0.0;
        d.mu_w_hi[i] = -tape.delta;
    }
    return out;
}

inline CompletionResult complete_with_objective(const Network& net,
                                                const LoadInstance& inst,
                                                const Prediction& pred) {
    CompletionResult out = complete(net, pred);
    out.dual.objective = dual_objective(net, inst, out.dual);
    return out;
}

// Exact reverse-mode derivative of the dual objective with respect to the
// prediction. Subgradient conventions at kinks: cone apex at the origin
// contributes zero, ReLU at exact equality takes the zero side, degenerate
// minimum eigenvalues use the tape's deterministic eigenvector.
inline Prediction backward(const Network& net, const LoadInstance& inst,
                           const CompletionTape& tape, const DualSolution& d) {
    const std::size_t n = net.n_buses(), m = net.n_branches();
    check_dimensions(net, d);
    check_dimensions(net, inst);

    Prediction g = Prediction::zeros(n, m);

    // Direct demand terms and the ReLU-masked dispatch bound terms.
    for (std::size_t i = 0; i < n; ++i) {
        const Generator& gen = net.generators[i];
        g.lam_p[i] = inst.p_d[i];
        g.lam_q[i] = inst.q_d[i];
        if (tape.mask_pg_lo[i]) g.lam_p[i] -= gen.p_min;
        if (tape.mask_pg_hi[i]) g.lam_p[i] -= gen.p_max;
        if (tape.mask_qg_lo[i]) g.lam_q[i] -= gen.q_min;
        if (tape.mask_qg_hi[i]) g.lam_q[i] -= gen.q_max;
    }

    // Cone apexes: d(-s_max * ||(nu_p, nu_q)||) / d nu.
    for (std::size_t e = 0; e < m; ++e) {
        const double s_max = net.branches[e].s_max;
        if (tape.cone_norm_fwd[e] > 0) {
            g.nu_p_fwd[e] -= s_max * d.nu_fwd[e].p / tape.cone_norm_fwd[e];
            g.nu_q_fwd[e] -= s_max * d.nu_fwd[e].q / tape.cone_norm_fwd[e];
        }
        if (tape.cone_norm_rev[e] > 0) {
            g.nu_p_rev[e] -= s_max * d.nu_rev[e].p / tape.cone_norm_rev[e];
            g.nu_q_rev[e] -= s_max * d.nu_rev[e].q / tape.cone_norm_rev[e];
        }
    }

    // Eigenvalue-shift path, active only when the repair fired. The objective
    // sees delta through -sum_i v_max_i^2 * mu_w_hi_i = delta * sum_i v_max_i^2,
    // and d delta / d S_hat is the rank-one projector from the tape.
    if (tape.delta < 0) {
        double upstream = 0;
        for (std::size_t i = 0; i < n; ++i)
            upstream += net.buses[i].v_max * net.buses[i].v_max;
        const HermitianMatrix proj = d_lambda_min(tape.min_pair);

        // Pair the projector against d S_hat / d (each dual variable).
        for (std::size_t i = 0; i < n; ++i) {
            const double gii = upstream * proj.at(i, i).real();
            g.lam_p[i] += net.buses[i].shunt_g * gii;
            g.lam_q[i] += -net.buses[i].shunt_b * gii;
        }
        for (std::size_t e = 0; e < m; ++e) {
            const BranchAdmittance& br = net.branches[e];
            const std::size_t i = static_cast<std::size_t>(br.from);
            const std::size_t j = static_cast<std::size_t>(br.to);
            const double gii = upstream * proj.at(i, i).real();
            const double gjj = upstream * proj.at(j, j).real();
            const complex gij = upstream * proj.at(i, j);
            const double re = gij.real(), im = gij.imag();
            const double gff = br.y_ff.real(), bff = br.y_ff.imag();
            const double gft = br.y_ft.real(), bft = br.y_ft.imag();
            const double gtf = br.y_tf.real(), btf = br.y_tf.imag();
            const double gtt = br.y_tt.real(), btt = br.y_tt.imag();

            const double g_lpf = -(gff * gii + gft * re + bft * im);
            const double g_lpr = -(gtt * gjj + gtf * re - btf * im);
            const double g_lqf = bff * gii + bft * re - gft * im;
            const double g_lqr = btt * gjj + btf * re + gtf * im;

            // Chain through the flow-linking recovery of step 2.
            g.nu_p_fwd[e] += g_lpf;
            g.lam_p[i] -= g_lpf;
            g.nu_q_fwd[e] += g_lqf;
            g.lam_q[i] -= g_lqf;
            g.nu_p_rev[e] += g_lpr;
            g.lam_p[j] -= g_lpr;
            g.nu_q_rev[e] += g_lqr;
            g.lam_q[j] -= g_lqr;
        }
    }
    return g;
}

}  // namespace opfdual
