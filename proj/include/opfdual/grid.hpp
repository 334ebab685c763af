#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace opfdual {

using complex = std::complex<double>;

struct Bus {
    int id = 0;          // dense 0-based index
    double shunt_g = 0;  // per-unit shunt conductance
    double shunt_b = 0;  // per-unit shunt susceptance
    double v_min = 0;
    double v_max = 0;
};

struct Generator {
    int bus = 0;
    double cost = 0;  // linear cost, $/pu-h
    double p_min = 0, p_max = 0;
    double q_min = 0, q_max = 0;
};

// Two-port Pi-model admittance entries for one branch, plus thermal limit.
struct BranchAdmittance {
    int from = 0, to = 0;
    complex y_ff, y_ft, y_tf, y_tt;
    double s_max = 0;  // per-unit apparent power limit
};

struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Generator> generators;  // aligned to buses, one per bus
    std::vector<BranchAdmittance> branches;
    std::vector<double> ref_p;  // reference active demand, per bus (pu)
    std::vector<double> ref_q;  // reference reactive demand, per bus (pu)

    std::size_t n_buses() const { return buses.size(); }
    std::size_t n_branches() const { return branches.size(); }
};

// Standard MATPOWER Pi-model: series admittance y = 1/(r+jx), charging b/2 on
// each side, off-nominal tap ratio and phase shift on the from side.
inline BranchAdmittance build_branch_admittance(double r, double x, double b_charge,
                                                double tap_ratio, double phase_shift) {
    if (r * r + x * x <= 0.0)
        throw std::invalid_argument("branch has zero series impedance");
    if (tap_ratio <= 0.0)
        throw std::invalid_argument("branch tap ratio must be positive");

    const complex y = 1.0 / complex(r, x);
    const complex ych(0.0, b_charge / 2.0);
    const complex tap = tap_ratio * std::polar(1.0, phase_shift);

    BranchAdmittance ba;
    ba.y_ff = (y + ych) / (tap_ratio * tap_ratio);
    ba.y_ft = -y / std::conj(tap);
    ba.y_tf = -y / tap;
    ba.y_tt = y + ych;
    return ba;
}

inline std::vector<std::string> validate_network(const Network& net) {
    std::vector<std::string> violations;
    const auto n = net.buses.size();

    for (std::size_t i = 0; i < n; ++i) {
        const Bus& b = net.buses[i];
        if (!(b.v_min > 0.0 && b.v_min <= b.v_max))
            violations.push_back("bus " + std::to_string(i) +
                                 ": requires 0 < v_min <= v_max");
        if (!std::isfinite(b.shunt_g) || !std::isfinite(b.shunt_b))
            violations.push_back("bus " + std::to_string(i) + ": non-finite shunt");
    }

    if (net.generators.size() != n)
        violations.push_back("generator list length " +
                             std::to_string(net.generators.size()) +
                             " != bus count " + std::to_string(n));
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const Generator& gen = net.generators[g];
        if (gen.bus < 0 || static_cast<std::size_t>(gen.bus) >= n)
            violations.push_back("generator " + std::to_string(g) +
                                 ": bus index out of range");
        if (gen.p_min > gen.p_max || gen.q_min > gen.q_max)
            violations.push_back("generator " + std::to_string(g) +
                                 ": inverted dispatch bounds");
    }

    std::vector<std::vector<int>> seen(n);
    for (std::size_t e = 0; e < net.branches.size(); ++e) {
        const BranchAdmittance& br = net.branches[e];
        if (br.from < 0 || static_cast<std::size_t>(br.from) >= n ||
            br.to < 0 || static_cast<std::size_t>(br.to) >= n) {
            violations.push_back("branch " + std::to_string(e) +
                                 ": endpoint out of range");
            continue;
        }
        if (br.from == br.to)
            violations.push_back("branch " + std::to_string(e) + ": self loop");
        if (br.s_max < 0)
            violations.push_back("branch " + std::to_string(e) + ": negative s_max");
        for (const complex* y : {&br.y_ff, &br.y_ft, &br.y_tf, &br.y_tt})
            if (!std::isfinite(y->real()) || !std::isfinite(y->imag())) {
                violations.push_back("branch " + std::to_string(e) +
                                     ": non-finite admittance");
                break;
            }
        // Model 3 indexes branch duals by unordered bus pair: simple graph only.
        bool dup = false;
        for (int other : seen[br.from]) dup = dup || other == br.to;
        for (int other : seen[br.to]) dup = dup || other == br.from;
        if (dup)
            violations.push_back("branch " + std::to_string(e) +
                                 ": parallel branch between buses " +
                                 std::to_string(br.from) + " and " +
                                 std::to_string(br.to));
        seen[br.from].push_back(br.to);
    }

    if (net.ref_p.size() != n || net.ref_q.size() != n)
        violations.push_back("reference load vectors not aligned to buses");

    return violations;
}

}  // namespace opfdual
