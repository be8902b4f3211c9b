#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gridsite/powerflow.hpp"
#include "support/oracles.hpp"

using namespace gridsite;

namespace {

NetworkModel two_bus() { return make_network({{1, 0, 0}, {2, 500, 300}}, {{1, 2, 1.0, 2.0}}, 1, 12.66); }

double max_voltage_gap(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
    return gap;
}

}  // namespace

TEST(Solve, Ieee33BaseCase) {
    const auto net = ieee33();
    const auto mats = build_sweep_matrices(net);
    const auto res = solve(net, mats, base_injections(net));
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.total_loss.real(), 202.677, 0.01);
    EXPECT_NEAR(res.total_loss.imag(), 135.141, 0.01);
    EXPECT_NEAR(res.loss_magnitude(), 243.600, 0.01);
    EXPECT_EQ(net.buses[res.min_voltage_index()].id, 18);
    EXPECT_NEAR(std::abs(res.voltages[res.min_voltage_index()]), 0.91309, 1e-4);
    EXPECT_LE(res.iterations, 10);
    EXPECT_LT(res.residual, 1e-6);
}

TEST(Solve, Ieee33MatchesNodalOracle) {
    const auto net = ieee33();
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net), {.tol = 1e-12});
    const auto ref = oracle::nodal_solve(net, base_injections(net));
    EXPECT_LT(max_voltage_gap(res.voltages, ref), 1e-9);
    const auto ref_loss = oracle::nodal_loss(net, ref);
    EXPECT_NEAR(res.total_loss.real(), ref_loss.real(), 1e-6);
    EXPECT_NEAR(res.total_loss.imag(), ref_loss.imag(), 1e-6);
}

TEST(Solve, RandomFeedersMatchNodalOracle) {
    std::mt19937_64 rng(31337);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 30);
        const auto raw = oracle::random_radial(rng, n);
        const auto net = make_network(raw.buses, raw.branches, raw.slack_bus, raw.v_base);
        const auto res = solve(net, build_sweep_matrices(net), base_injections(net), {.tol = 1e-12, .max_iter = 500});
        if (!res.converged) continue;  // heavy random loads can push past the nose point
        const auto ref = oracle::nodal_solve(net, base_injections(net));
        EXPECT_LT(max_voltage_gap(res.voltages, ref), 1e-6) << "trial " << trial;
        ++checked;
    }
    EXPECT_GE(checked, 90);
}

// Frozen from the closed-form two-bus solution.
TEST(Solve, TwoBusFrozenValues) {
    const auto net = two_bus();
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net), {.tol = 1e-12});
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(std::abs(res.voltages[1]), 0.9930793221021876, 1e-10);
    EXPECT_NEAR(res.total_loss.real(), 2.151015933817349, 1e-8);
    EXPECT_NEAR(res.total_loss.imag(), 4.302031867634698, 1e-8);
    EXPECT_NEAR(res.loss_magnitude(), 4.8098178487007806, 1e-8);
}

TEST(Solve, PowerBalanceAtSlack) {
    const auto net = ieee33();
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net), {.tol = 1e-12});
    // Power drawn from the slack equals load plus loss.
    Complex out{};
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        if (net.branches[k].from_bus == net.slack_bus) out += Complex{net.v0, 0} * std::conj(res.branch_currents[k]) * 1000.0;
    }
    EXPECT_NEAR(out.real(), net.total_p_load() + res.total_loss.real(), 1e-6);
    EXPECT_NEAR(out.imag(), net.total_q_load() + res.total_loss.imag(), 1e-6);
}

TEST(Solve, TotalLossIsSumOfBranchLosses) {
    const auto net = ieee33();
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net));
    double p = 0.0, q = 0.0;
    for (const auto& l : res.branch_losses) {
        EXPECT_GE(l.p, 0.0);
        EXPECT_GE(l.q, 0.0);
        p += l.p;
        q += l.q;
    }
    EXPECT_DOUBLE_EQ(res.total_loss.real(), p);
    EXPECT_DOUBLE_EQ(res.total_loss.imag(), q);
}

TEST(Solve, Deterministic) {
    const auto net = ieee33();
    const auto mats = build_sweep_matrices(net);
    const auto a = solve(net, mats, base_injections(net));
    const auto b = solve(net, mats, base_injections(net));
    EXPECT_EQ(a.voltages, b.voltages);
    EXPECT_EQ(a.total_loss, b.total_loss);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, NoLoadMeansFlatProfile) {
    auto net = ieee33();
    for (auto& b : net.buses) b.p_load = b.q_load = 0.0;
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net));
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.total_loss, Complex{});
    for (auto v : res.voltages) EXPECT_EQ(v, Complex(1.0, 0.0));
}

TEST(Solve, ReportsNonConvergence) {
    auto net = two_bus();
    net.buses[1].p_load = 1e6;  // far beyond the nose of the PV curve
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net), {.max_iter = 20});
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.iterations, 20);
}

TEST(Solve, SlackOnly) {
    NetworkModel net;
    net.buses = {{1, 0, 0}};
    net.slack_bus = 1;
    net.v_base = 12.66;
    const auto res = solve(net, build_sweep_matrices(net), base_injections(net));
    EXPECT_TRUE(res.converged);
    ASSERT_EQ(res.voltages.size(), 1u);
    EXPECT_EQ(res.total_loss, Complex{});
}

TEST(SolverOptions, Validation) {
    EXPECT_NO_THROW(SolverOptions{}.validate());
    EXPECT_THROW((SolverOptions{.tol = 0.0}).validate(), std::invalid_argument);
    EXPECT_THROW((SolverOptions{.max_iter = 0}).validate(), std::invalid_argument);
    EXPECT_THROW((SolverOptions{.s_base_kva = -1}).validate(), std::invalid_argument);
}

TEST(EquivalentCurrents, FrozenValue) {
    const Complex s{0.1, 0.0};
    const Complex v = std::polar(0.98, -std::numbers::pi / 180.0);
    const auto i = equivalent_currents(std::span(&s, 1), std::span(&v, 1));
    EXPECT_NEAR(i[0].real(), 0.10202527501595829, 1e-15);
    EXPECT_NEAR(i[0].imag(), -0.0017808577997228073, 1e-15);
}

TEST(EquivalentCurrents, ZeroVoltageThrows) {
    const std::vector<Complex> s{{0.1, 0.0}}, v{{0.0, 0.0}};
    EXPECT_THROW(equivalent_currents(s, v), SingularInjectionError);
}

TEST(EquivalentCurrents, MismatchedSizes) {
    const std::vector<Complex> s(2), v(3, Complex{1.0, 0.0});
    EXPECT_THROW(equivalent_currents(s, v), std::invalid_argument);
}

TEST(OhmicLoss, ScalesWithCurrentSquared) {
    const auto a = ohmic_loss(0.5, 0.25, 2.0);
    EXPECT_DOUBLE_EQ(a.p, 2.0);
    EXPECT_DOUBLE_EQ(a.q, 1.0);
    const auto z = ohmic_loss(0.5, 0.25, 0.0);
    EXPECT_EQ(z.p, 0.0);
    EXPECT_EQ(z.q, 0.0);
}

TEST(ImpedanceBase, Ieee33) {
    EXPECT_DOUBLE_EQ(impedance_base(ieee33(), {}), 12.66 * 12.66);
    EXPECT_DOUBLE_EQ(impedance_base(ieee33(), {.s_base_kva = 100000}), 12.66 * 12.66 / 100.0);
}

TEST(Solve, ResultIndependentOfPowerBase) {
    const auto net = ieee33();
    const auto mats = build_sweep_matrices(net);
    const auto a = solve(net, mats, base_injections(net), {.tol = 1e-12});
    const auto b = solve(net, mats, base_injections(net), {.tol = 1e-12, .s_base_kva = 100000});
    EXPECT_NEAR(a.total_loss.real(), b.total_loss.real(), 1e-8);
    EXPECT_LT(max_voltage_gap(a.voltages, b.voltages), 1e-12);
}
