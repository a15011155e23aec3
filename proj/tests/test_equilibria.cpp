#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "vcstab/equilibria.hpp"

using namespace vcstab;

namespace {
const NetworkParams kNet(2.0, 1.0);
const ControllerParams kCtrl(0.1, 0.1);
}  // namespace

TEST(SolveTotalConductance, Examples) {
    auto r = solve_total_conductance(kNet, 0.75);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_NEAR(r[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(r[1], 3.0, 1e-15);
    EXPECT_NEAR(total_power(kNet, r[0]), 0.75, 1e-15);
    EXPECT_NEAR(total_power(kNet, r[1]), 0.75, 1e-15);

    r = solve_total_conductance(kNet, 1.0);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], 1.0);

    EXPECT_TRUE(solve_total_conductance(kNet, 1.2).empty());

    r = solve_total_conductance(NetworkParams(3.0, 0.7), 0.0);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], 0.0);

    EXPECT_THROW((void)solve_total_conductance(kNet, -0.1), std::domain_error);
}

TEST(SolveTotalConductance, NearCapacityTolerance) {
    EXPECT_EQ(solve_total_conductance(kNet, 1.0 + 5e-13).size(), 1u);
    EXPECT_EQ(solve_total_conductance(kNet, 1.0 - 5e-13).size(), 1u);
    EXPECT_EQ(solve_total_conductance(kNet, 1.0 - 1e-9).size(), 2u);
    EXPECT_TRUE(solve_total_conductance(kNet, 1.0 + 1e-9).empty());
    // the two roots stay on their sides of g_l right next to capacity
    const auto r = solve_total_conductance(kNet, 1.0 - 1e-9);
    EXPECT_LT(r[0], 1.0);
    EXPECT_GT(r[1], 1.0);
}

TEST(SolveTotalConductance, VietaAndStraddle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> par(0.3, 5.0), frac(1e-6, 1.0 - 1e-6);
    for (int k = 0; k < 500; ++k) {
        const NetworkParams net(par(rng), par(rng));
        const double gl = net.g_l();
        const double p0n = frac(rng) * p_max(net);
        const auto r = solve_total_conductance(net, p0n);
        ASSERT_EQ(r.size(), 2u);
        EXPECT_NEAR(r[0] * r[1], gl * gl, 1e-10 * gl * gl);
        const double sum = std::pow(net.E() * gl, 2) / p0n - 2.0 * gl;
        EXPECT_NEAR(r[0] + r[1], sum, 1e-10 * sum);
        EXPECT_LT(r[0], gl);
        EXPECT_GT(r[1], gl);
    }
}

TEST(InflexibleEquilibria, Examples) {
    std::vector<double> p0{0.5, 0.25};
    auto pts = inflexible_equilibria(kNet, p0);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts[0].cls, EquilibriumClass::Es_low);
    EXPECT_NEAR(pts[0].g_star[0], 2.0 / 9.0, 1e-15);
    EXPECT_NEAR(pts[0].g_star[1], 1.0 / 9.0, 1e-15);
    EXPECT_NEAR(pts[0].v_star, 1.5, 1e-15);
    EXPECT_EQ(pts[1].cls, EquilibriumClass::Es_high);
    EXPECT_NEAR(pts[1].g_star[0], 2.0, 1e-14);
    EXPECT_NEAR(pts[1].g_star[1], 1.0, 1e-14);
    EXPECT_NEAR(pts[1].v_star, 0.5, 1e-15);

    std::vector<double> one{1.0};
    pts = inflexible_equilibria(kNet, one);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].cls, EquilibriumClass::boundary);
    EXPECT_EQ(pts[0].g_star[0], 1.0);
    EXPECT_EQ(pts[0].v_star, 1.0);

    std::vector<double> over{0.6, 0.6};
    EXPECT_TRUE(inflexible_equilibria(kNet, over).empty());
}

TEST(InflexibleEquilibria, ResidualAndRootRecovery) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + k % 8;
        std::vector<double> p0(n);
        double s = 0.0;
        for (auto& p : p0) s += (p = u(rng));
        const double target = u(rng) * 0.999;
        for (auto& p : p0) p *= target / s;
        const auto loads = [&] {
            std::vector<LoadSpec> v;
            for (double p : p0) v.push_back({p, false, 0.0});
            return LoadSet(v);
        }();
        for (const auto& pt : inflexible_equilibria(kNet, p0)) {
            EXPECT_LT(equilibrium_residual(pt, kNet, loads, p0, std::nullopt), 1e-9);
            EXPECT_NEAR(total_conductance(pt.g_star), pt.gN_star, 1e-10 * pt.gN_star);
        }
    }
}

TEST(LoadSatisfactionSet, Examples) {
    LoadSet loads({{0.5, true, 1.0}, {0.25, false, 0.0}});
    auto pts = load_satisfaction_set(kNet, loads, kCtrl);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_NEAR(pts[0].gN_star, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(pts[1].gN_star, 3.0, 1e-14);
    for (const auto& pt : pts) {
        EXPECT_EQ(pt.phi_star, 0.0);
        ASSERT_EQ(pt.ghat_star.size(), 1u);
        EXPECT_EQ(pt.ghat_star[0], pt.g_star[0]);
        EXPECT_LT(equilibrium_residual(pt, kNet, loads, loads.demands(), kCtrl), 1e-9);
    }

    LoadSet at_cap({{0.6, true, 1.0}, {0.4, false, 0.0}});
    pts = load_satisfaction_set(kNet, at_cap, kCtrl);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].cls, EquilibriumClass::boundary);
    EXPECT_EQ(pts[0].phi_star, 0.0);

    LoadSet over({{0.7, true, 1.0}, {0.5, false, 0.0}});
    EXPECT_TRUE(load_satisfaction_set(kNet, over, kCtrl).empty());
}

TEST(ProportionalAllocationPoint, Examples) {
    LoadSet loads({{0.7, true, 1.0}, {0.5, false, 0.0}});
    auto pt = proportional_allocation_point(kNet, loads, kCtrl);
    EXPECT_TRUE(pt.exists);
    EXPECT_EQ(pt.cls, EquilibriumClass::Ep);
    EXPECT_NEAR(pt.g_star[0], 0.5, 1e-15);
    EXPECT_NEAR(pt.g_star[1], 0.5, 1e-15);
    EXPECT_NEAR(pt.phi_star, 0.2, 1e-15);
    EXPECT_EQ(pt.v_star, 1.0);
    EXPECT_NEAR(total_conductance(pt.g_star), kNet.g_l(), 1e-15);
    EXPECT_LT(equilibrium_residual(pt, kNet, loads, loads.demands(), kCtrl), 1e-12);

    LoadSet at_cap({{0.6, true, 1.0}, {0.4, false, 0.0}});
    pt = proportional_allocation_point(kNet, at_cap, kCtrl);
    EXPECT_EQ(pt.phi_star, 0.0);
    const auto lp = load_powers(kNet, at_cap, pt.g_star);
    for (double d : lp.mismatch) EXPECT_NEAR(d, 0.0, 1e-15);

    LoadSet depleted({{0.1, true, 1.0}, {1.4, false, 0.0}});
    pt = proportional_allocation_point(kNet, depleted, kCtrl);
    EXPECT_FALSE(pt.exists);
    EXPECT_NEAR(pt.g_star[0], 0.1 + (1.0 - 1.5), 1e-15);

    LoadSet none({{0.5, false, 0.0}});
    EXPECT_THROW((void)proportional_allocation_point(kNet, none, kCtrl), UnsupportedConfiguration);
}

TEST(ProportionalAllocationPoint, SheddingIsProportional) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 2 + k % 7;
        std::vector<LoadSpec> specs;
        for (std::size_t i = 0; i < n; ++i) specs.push_back({u(rng), i == 0 || u(rng) < 0.5, u(rng)});
        LoadSet loads(specs);
        const auto pt = proportional_allocation_point(kNet, loads, kCtrl);
        const auto p0 = loads.demands();
        const auto lp = load_powers(kNet, p0, pt.g_star);
        const double ratio0 = lp.mismatch[loads.flexible().front()] / loads[loads.flexible().front()].kappa;
        double shed = 0.0;
        for (std::size_t i : loads.flexible()) {
            EXPECT_NEAR(lp.mismatch[i] / loads[i].kappa, ratio0, 1e-12);
            shed += lp.mismatch[i];
        }
        for (std::size_t i : loads.inflexible()) EXPECT_NEAR(lp.mismatch[i], 0.0, 1e-12);
        EXPECT_NEAR(shed, p_max(kNet) - loads.total_demand(), 1e-12);
        EXPECT_LT(equilibrium_residual(pt, kNet, loads, p0, kCtrl), 1e-9);
    }
}
