#pragma once

// Closed-form operating points. Without control the loads settle where the
// total-conductance quadratic has a root; with the VCS controller there is in
// addition the single capacity point E_p where the shortfall is split in
// proportion to the shedding weights.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcstab/dynamics.hpp"
#include "vcstab/network.hpp"

namespace vcstab {

enum class EquilibriumClass { Es_low, Es_high, Ep, boundary };

[[nodiscard]] inline const char* to_string(EquilibriumClass c) noexcept {
    switch (c) {
        case EquilibriumClass::Es_low: return "Es_low";
        case EquilibriumClass::Es_high: return "Es_high";
        case EquilibriumClass::Ep: return "Ep";
        case EquilibriumClass::boundary: return "boundary";
    }
    return "?";
}

struct EquilibriumPoint {
    Conductances g_star;
    double phi_star = 0.0;
    std::vector<double> ghat_star;  // g_star restricted to F; empty for the uncontrolled system
    double gN_star = 0.0;
    double v_star = 0.0;
    EquilibriumClass cls = EquilibriumClass::Es_low;
    bool exists = true;

    [[nodiscard]] VcsState state() const { return {g_star, phi_star, ghat_star}; }
};

/// |p0n - P_max| within this fraction of P_max counts as the double root.
inline constexpr double kCapacityTolerance = 1e-12;

/// Roots of gN^2 + (2 g_l - (E g_l)^2 / p0n) gN + g_l^2 = 0, ascending.
[[nodiscard]] inline std::vector<double> solve_total_conductance(const NetworkParams& net, double p0n) {
    if (!(p0n >= 0.0) || !std::isfinite(p0n)) {
        throw std::domain_error("solve_total_conductance: total demand must be finite and >= 0");
    }
    if (p0n == 0.0) return {0.0};
    const double pm = p_max(net);
    const double gl = net.g_l();
    if (std::abs(p0n - pm) <= kCapacityTolerance * pm) return {gl};
    if (p0n > pm) return {};
    const double eg2 = (net.E() * gl) * (net.E() * gl);
    const double minus_b = eg2 / p0n - 2.0 * gl;  // > 0 below capacity
    // discriminant factored as (B - 2 g_l)(B + 2 g_l) to keep precision near capacity
    const double disc = (eg2 / p0n) * 4.0 * gl * (pm - p0n) / p0n;
    const double high = 0.5 * (minus_b + std::sqrt(disc));
    const double low = gl * gl / high;
    return {low, high};
}

namespace detail {

inline EquilibriumClass classify_root(const NetworkParams& net, double gN, std::size_t n_roots) {
    if (n_roots == 1 && gN == net.g_l()) return EquilibriumClass::boundary;
    return gN < net.g_l() ? EquilibriumClass::Es_low : EquilibriumClass::Es_high;
}

inline double sum(std::span<const double> p) {
    double s = 0.0;
    for (double q : p) s += q;
    return s;
}

}  // namespace detail

/// Demand-satisfying points g_j = P_0,j / v^2 for each total-conductance root.
/// Every load is treated as running the uncontrolled law.
[[nodiscard]] inline std::vector<EquilibriumPoint> inflexible_equilibria(const NetworkParams& net,
                                                                         std::span<const double> p0) {
    for (double p : p0) {
        if (!(p >= 0.0)) throw std::domain_error("inflexible_equilibria: demands must be >= 0");
    }
    const auto roots = solve_total_conductance(net, detail::sum(p0));
    std::vector<EquilibriumPoint> out;
    for (double gN : roots) {
        EquilibriumPoint pt;
        pt.v_star = voltage(net, gN);
        const double v2 = pt.v_star * pt.v_star;
        pt.g_star.resize(p0.size());
        for (std::size_t j = 0; j < p0.size(); ++j) pt.g_star[j] = p0[j] / v2;
        pt.gN_star = gN;
        pt.cls = detail::classify_root(net, gN, roots.size());
        out.push_back(std::move(pt));
    }
    return out;
}

[[nodiscard]] inline std::vector<EquilibriumPoint> inflexible_equilibria(const NetworkParams& net,
                                                                         const LoadSet& loads) {
    const auto p0 = loads.demands();
    return inflexible_equilibria(net, std::span<const double>(p0));
}

/// E_s: all demands met, phi* = 0 and ghat* = g* on the flexible loads.
[[nodiscard]] inline std::vector<EquilibriumPoint> load_satisfaction_set(const NetworkParams& net,
                                                                         const LoadSet& loads,
                                                                         std::span<const double> p0) {
    if (p0.size() != loads.size()) throw ShapeError("load_satisfaction_set: demand vector length mismatch");
    auto pts = inflexible_equilibria(net, p0);
    for (auto& pt : pts) {
        pt.phi_star = 0.0;
        pt.ghat_star.clear();
        for (std::size_t i : loads.flexible()) pt.ghat_star.push_back(pt.g_star[i]);
    }
    return pts;
}

[[nodiscard]] inline std::vector<EquilibriumPoint> load_satisfaction_set(const NetworkParams& net,
                                                                         const LoadSet& loads,
                                                                         const ControllerParams& /*ctrl*/) {
    const auto p0 = loads.demands();
    return load_satisfaction_set(net, loads, std::span<const double>(p0));
}

struct UnsupportedConfiguration : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// E_p: the unique point at capacity (gN* = g_l, v* = E/2) where flexible
/// load i absorbs kappa_i / kappa_bar of the shortfall. Reported with
/// exists = false when that would need a negative conductance.
[[nodiscard]] inline EquilibriumPoint proportional_allocation_point(const NetworkParams& net, const LoadSet& loads,
                                                                    std::span<const double> p0) {
    if (loads.n_flexible() == 0) {
        throw UnsupportedConfiguration("proportional_allocation_point: needs at least one flexible load");
    }
    if (p0.size() != loads.size()) throw ShapeError("proportional_allocation_point: demand vector length mismatch");
    const double pm = p_max(net);
    const double total = detail::sum(p0);
    const double kbar = loads.kappa_bar();
    const double v = net.E() / 2.0;
    const double v2 = v * v;

    EquilibriumPoint pt;
    pt.cls = EquilibriumClass::Ep;
    pt.v_star = v;
    pt.gN_star = net.g_l();
    pt.phi_star = (total - pm) / kbar;
    pt.g_star.resize(loads.size());
    for (std::size_t i = 0; i < loads.size(); ++i) {
        double p = p0[i];
        if (loads[i].flexible) p += loads[i].kappa / kbar * (pm - total);
        pt.g_star[i] = p / v2;
    }
    for (std::size_t i : loads.flexible()) {
        pt.ghat_star.push_back(pt.g_star[i]);
        if (pt.g_star[i] < 0.0) pt.exists = false;
    }
    return pt;
}

[[nodiscard]] inline EquilibriumPoint proportional_allocation_point(const NetworkParams& net, const LoadSet& loads,
                                                                    const ControllerParams& /*ctrl*/) {
    const auto p0 = loads.demands();
    return proportional_allocation_point(net, loads, std::span<const double>(p0));
}

/// Infinity norm of the right-hand side at the point; uses the closed loop
/// when a controller is given.
[[nodiscard]] inline double equilibrium_residual(const EquilibriumPoint& pt, const NetworkParams& net,
                                                 const LoadSet& loads, std::span<const double> p0,
                                                 const std::optional<ControllerParams>& ctrl) {
    double r = 0.0;
    auto upd = [&r](double q) { r = std::max(r, std::abs(q)); };
    if (!ctrl) {
        for (double q : inflexible_rhs(net, p0, pt.g_star)) upd(q);
        return r;
    }
    const auto d = vcs_rhs(net, loads, p0, pt.state(), *ctrl);
    for (double q : d.g) upd(q);
    upd(d.phi);
    for (double q : d.ghat) upd(q);
    return r;
}

}  // namespace vcstab
