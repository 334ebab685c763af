#include <doctest.h>

#include "fixtures.hpp"
#include "opfdual/dual.hpp"

using namespace opfdual;

namespace {

// A hand-built feasible dual point for the 2-bus fixture (pure reactance
// x = 0.1, generator costs 10 and 50 $/pu-h):
//   lam_p = (10, 0), everything else chosen so each equality closes exactly;
//   the bus-1 dispatch equality needs mu_pg_lo[1] = 50 to reach its cost.
// The operator then has off-diagonal -50j, so the PSD block needs the shift
// mu_w_hi = 50 with S = [[50, 50j], [-50j, 50]] (eigenvalues 0 and 100).
DualSolution two_bus_feasible(const Network& net) {
    DualSolution d = DualSolution::zeros(2, 1);
    d.lam_p = {10.0, 0.0};
    d.lam_p_fwd[0] = -10.0;  // nu_p_fwd = 0 = lam_p[0] + lam_p_fwd
    d.mu_pg_lo[1] = 50.0;
    d.mu_w_hi = {50.0, 50.0};
    d.S.set(0, 0, 50.0);
    d.S.set(1, 1, 50.0);
    d.S.set(0, 1, complex(0.0, 50.0));
    d.objective = dual_objective(net, fixtures::reference_load(net), d);
    return d;
}

}  // namespace

TEST_CASE("dimension mismatch is rejected") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = DualSolution::zeros(3, 1);
    CHECK_THROWS_AS(dual_objective(net, fixtures::reference_load(net), d),
                    std::invalid_argument);
    LoadInstance bad{{0.0}, {0.0}};
    CHECK_THROWS_AS(dual_objective(net, bad, DualSolution::zeros(2, 1)),
                    std::invalid_argument);
}

TEST_CASE("zero dual has zero objective") {
    for (const char* name : {"case2.m", "case3.m", "case14.m"}) {
        const Network net = fixtures::load_case(name);
        const DualSolution d = DualSolution::zeros(net.n_buses(), net.n_branches());
        CHECK(dual_objective(net, fixtures::reference_load(net), d) == 0.0);
    }
}

TEST_CASE("objective matches a hand-computed term sum") {
    // 2-bus fixture: load 0.5 + 0.1j pu at bus 1, p_max = 3 pu at bus 0,
    // v_min = 0.95, s_max = 10 * hypot(0.5, 0.1). With
    //   lam_p = (2, 3), lam_q = (1, -1), mu_pg_hi[0] = 4, mu_w_lo[1] = 0.5,
    //   nu_fwd.s = 2
    // the terms are 0.5*3 - 0.1 + 0.45125 - 12 - 2*5.0990195... by hand.
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = DualSolution::zeros(2, 1);
    d.lam_p = {2.0, 3.0};
    d.lam_q = {1.0, -1.0};
    d.mu_pg_hi[0] = 4.0;
    d.mu_w_lo[1] = 0.5;
    d.nu_fwd[0].s = 2.0;
    const double z = dual_objective(net, fixtures::reference_load(net), d);
    CHECK(z == doctest::Approx(-20.346789027185569).epsilon(1e-13));
}

TEST_CASE("hand-built feasible point passes verification") {
    const Network net = fixtures::load_case("case2.m");
    const DualSolution d = two_bus_feasible(net);
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK(rep.pass);
    CHECK(rep.max_eq_residual <= 1e-12);
    CHECK(rep.worst_cone_violation <= 0.0);
    CHECK(rep.min_eig_S >= -1e-12);
    CHECK(rep.worst_family == "none");
    // objective by hand: -v_max^2 * (50 + 50) = -1.1025 * 100
    CHECK(d.objective == doctest::Approx(-110.25).epsilon(1e-13));
}

TEST_CASE("tampered PSD block is caught") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = two_bus_feasible(net);
    d.S.set(0, 0, 49.0);
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_family == "psd_linking");
    CHECK(rep.max_eq_residual == doctest::Approx(1.0));
}

TEST_CASE("indefinite S is caught even when the linking holds") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = two_bus_feasible(net);
    // shrink the shift so S picks up a negative eigenvalue
    d.mu_w_hi = {49.0, 49.0};
    d.S.set(0, 0, 49.0);
    d.S.set(1, 1, 49.0);
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_family == "psd_S");
    CHECK(rep.min_eig_S == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("perturbed multiplier trips the equality check") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = two_bus_feasible(net);
    d.lam_p[0] += 1e-6;
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_eq_residual == doctest::Approx(1e-6).epsilon(1e-6));
    // loosening the tolerance admits the same point
    VerifyTolerances loose;
    loose.eq = 1e-5;
    CHECK(verify_dual(net, fixtures::reference_load(net), d, loose).pass);
}

TEST_CASE("negative sign multiplier is a cone violation") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = two_bus_feasible(net);
    // shift both bus-1 dispatch multipliers so the equality still closes but
    // the upper one turns negative
    d.mu_pg_lo[1] = 49.5;
    d.mu_pg_hi[1] = -0.5;
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_eq_residual <= 1e-12);
    CHECK(rep.worst_family == "sign_mu_pg");
    CHECK(rep.worst_cone_violation == doctest::Approx(0.5));
}

TEST_CASE("cone apex below the norm is a violation") {
    const Network net = fixtures::load_case("case2.m");
    DualSolution d = two_bus_feasible(net);
    d.nu_fwd[0] = {4.0, 3.0, 4.0};  // norm 5 > apex 4, but equalities break too
    d.lam_p_fwd[0] = 3.0 - d.lam_p[0];
    d.lam_q_fwd[0] = 4.0 - d.lam_q[0];
    const FeasibilityReport rep = verify_dual(net, fixtures::reference_load(net), d);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_cone_violation == doctest::Approx(1.0));
}

TEST_CASE("gap metrics") {
    const GapMetrics m = duality_gap_metrics(100.0, 95.0, 90.0, 80.0);
    REQUIRE(m.gap.has_value());
    CHECK(*m.gap == doctest::Approx(0.1));
    REQUIRE(m.gap_closed.has_value());
    CHECK(*m.gap_closed == doctest::Approx((90.0 - 80.0) / (95.0 - 80.0)));

    const GapMetrics none = duality_gap_metrics(std::nullopt, std::nullopt, 90.0, std::nullopt);
    CHECK_FALSE(none.gap.has_value());
    CHECK_FALSE(none.gap_closed.has_value());

    // degenerate denominator yields no closure ratio
    const GapMetrics deg = duality_gap_metrics(100.0, 80.0, 90.0, 80.0);
    CHECK_FALSE(deg.gap_closed.has_value());
}

TEST_CASE("geometric mean") {
    CHECK(geometric_mean({1.0, 4.0}) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(geometric_mean({3.0}) == doctest::Approx(3.0));
    CHECK(geometric_mean({2.0, 0.0, 8.0}) == 0.0);
    CHECK_THROWS_AS(geometric_mean({}), std::invalid_argument);
    CHECK_THROWS_AS(geometric_mean({1.0, -2.0}), std::invalid_argument);
    // log-space evaluation survives magnitudes that would overflow a product
    std::vector<double> big(100, 1e300);
    CHECK(geometric_mean(big) == doctest::Approx(1e300));
}

TEST_CASE("mean, stddev and table formatting") {
    CHECK(arithmetic_mean({1.0, 2.0, 3.0}) == doctest::Approx(2.0));
    CHECK(population_stddev({2.0, 2.0, 2.0}) == 0.0);
    CHECK(population_stddev({1.0, 3.0}) == doctest::Approx(1.0));
    CHECK(format_mean_std(1.5, 0.25) == "1.500 (0.250)");
    // {40.167, 82.355}: mean 61.261, population stddev 21.094
    CHECK(format_mean_std({40.167, 82.355}) == "61.261 (21.094)");
}
