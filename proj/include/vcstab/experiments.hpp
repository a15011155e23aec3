#pragma once

// Experiment drivers: equilibrium sweeps over total demand, demand-ramp
// simulations and (a, b) grids.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcstab/dynamics.hpp"
#include "vcstab/equilibria.hpp"
#include "vcstab/network.hpp"
#include "vcstab/stability.hpp"

namespace vcstab {

// ---------------------------------------------------------------------------
// Bifurcation sweeps

struct SweepRow {
    double p0n = 0.0;
    EquilibriumClass branch = EquilibriumClass::Es_low;
    double gN = std::numeric_limits<double>::quiet_NaN();
    double v = std::numeric_limits<double>::quiet_NaN();
    std::optional<Verdict> verdict;  // empty when the branch does not exist
    bool exists = false;
    double residual = 0.0;
    std::optional<EquilibriumPoint> point;
    std::vector<double> demands;  // per-load demands at this grid point
};

struct SweepResult {
    std::vector<SweepRow> rows;

    /// Number of existing branches at grid value p0n.
    [[nodiscard]] std::size_t branch_count(double p0n) const {
        return static_cast<std::size_t>(std::count_if(
            rows.begin(), rows.end(), [p0n](const SweepRow& r) { return r.p0n == p0n && r.exists; }));
    }
};

/// Per-load demands scaled from the base set so that they sum to `total`.
[[nodiscard]] inline std::vector<double> scaled_demands(const LoadSet& base, double total) {
    if (!(base.total_demand() > 0.0)) throw std::invalid_argument("scaled_demands: base demand must be positive");
    auto p = base.demands();
    const double s = total / base.total_demand();
    for (auto& q : p) q *= s;
    return p;
}

/// Every equilibrium at the given demands: the E_s points, plus E_p when a
/// controller is attached (E_p merges with the boundary point at capacity).
[[nodiscard]] inline std::vector<EquilibriumPoint> all_equilibria(const NetworkParams& net, const LoadSet& loads,
                                                                  std::span<const double> p0,
                                                                  const std::optional<ControllerParams>& ctrl) {
    const bool controlled = ctrl && loads.n_flexible() > 0;
    auto pts = controlled ? load_satisfaction_set(net, loads, p0) : inflexible_equilibria(net, p0);
    const bool at_capacity = pts.size() == 1 && pts.front().cls == EquilibriumClass::boundary;
    if (controlled && !at_capacity) pts.push_back(proportional_allocation_point(net, loads, p0));
    return pts;
}

/// Solves and classifies every equilibrium at each grid value. Without a
/// controller all loads run the uncontrolled law.
[[nodiscard]] inline SweepResult bifurcation_sweep(const NetworkParams& net, const LoadSet& loads,
                                                   const std::optional<ControllerParams>& ctrl,
                                                   std::span<const double> p0n_grid) {
    for (double p : p0n_grid) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("bifurcation_sweep: grid values must be >= 0");
    }
    const bool controlled = ctrl && loads.n_flexible() > 0;
    SweepResult out;
    for (double p0n : p0n_grid) {
        const auto p0 = scaled_demands(loads, p0n);
        const auto pts = all_equilibria(net, loads, p0, ctrl);
        const bool at_capacity = pts.size() == 1 && pts.front().cls == EquilibriumClass::boundary;

        auto emit = [&](EquilibriumClass cls, const EquilibriumPoint* pt) {
            SweepRow row;
            row.p0n = p0n;
            row.branch = cls;
            row.demands = p0;
            if (pt) {
                row.gN = pt->gN_star;
                row.v = pt->v_star;
                row.exists = pt->exists;
                row.residual = equilibrium_residual(*pt, net, loads, p0, controlled ? ctrl : std::nullopt);
                if (pt->exists) row.verdict = classify(*pt, net, loads, p0, controlled ? ctrl : std::nullopt);
                row.point = *pt;
            }
            out.rows.push_back(std::move(row));
        };

        if (at_capacity) {
            emit(EquilibriumClass::boundary, &pts.front());
            continue;
        }
        auto find = [&](EquilibriumClass c) -> const EquilibriumPoint* {
            for (const auto& p : pts) {
                if (p.cls == c) return &p;
            }
            return nullptr;
        };
        emit(EquilibriumClass::Es_low, find(EquilibriumClass::Es_low));
        // p0n = 0 has the single root gN = 0 and no high branch
        if (p0n > 0.0) emit(EquilibriumClass::Es_high, find(EquilibriumClass::Es_high));
        if (controlled) emit(EquilibriumClass::Ep, find(EquilibriumClass::Ep));
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const SweepRow& x, const SweepRow& y) {
        if (x.p0n != y.p0n) return x.p0n < y.p0n;
        return static_cast<int>(x.branch) < static_cast<int>(y.branch);
    });
    return out;
}

/// Perturbs g by a factor 1.01 (phi, ghat untouched), integrates for
/// `horizon` and returns the final infinity-norm distance to the point.
[[nodiscard]] inline double perturbation_return_distance(const NetworkParams& net, const LoadSet& loads,
                                                         std::span<const double> p0,
                                                         const std::optional<ControllerParams>& ctrl,
                                                         const EquilibriumPoint& pt, double horizon,
                                                         double dt = 1e-2) {
    VcsState x0 = pt.state();
    for (auto& g : x0.g) g *= 1.01;
    const auto demand = DemandSchedule::constant({p0.begin(), p0.end()});
    const IntegratorOptions opts{dt, std::numeric_limits<std::size_t>::max()};
    Trajectory traj;
    const std::vector<Event> events{collapse_event(net)};
    if (ctrl && loads.n_flexible() > 0) {
        traj = integrate(VcsSystem(net, loads, *ctrl, demand), x0, 0.0, horizon, opts, events);
    } else {
        x0.ghat.clear();
        x0.phi = 0.0;
        traj = integrate(InflexibleSystem(net, demand), x0, 0.0, horizon, opts, events);
    }
    const auto& end = traj.states.back();
    double d = 0.0;
    for (std::size_t i = 0; i < end.g.size(); ++i) d = std::max(d, std::abs(end.g[i] - pt.g_star[i]));
    if (ctrl && loads.n_flexible() > 0) {
        d = std::max(d, std::abs(end.phi - pt.phi_star));
        for (std::size_t k = 0; k < end.ghat.size(); ++k) d = std::max(d, std::abs(end.ghat[k] - pt.ghat_star[k]));
    }
    if (traj.collapsed()) d = std::numeric_limits<double>::infinity();
    return d;
}

// ---------------------------------------------------------------------------
// Ramps

struct RampScenario {
    DemandSchedule schedule;
    double horizon = 0.0;
    double dt = 1e-3;
    std::optional<VcsState> initial;  // empty: start on the low E_s point of the initial demands
    std::size_t record_every = 1;
};

/// Total demand linear from `from_frac` to `to_frac` of P_max over
/// [t_start, t_end], per-load demands in the base proportions.
[[nodiscard]] inline DemandSchedule linear_ramp(const NetworkParams& net, const LoadSet& loads, double from_frac,
                                                double to_frac, double t_start, double t_end) {
    const double pm = p_max(net);
    if (from_frac == to_frac || t_end == t_start) {
        return DemandSchedule::constant(scaled_demands(loads, to_frac * pm));
    }
    return DemandSchedule({t_start, t_end},
                          {scaled_demands(loads, from_frac * pm), scaled_demands(loads, to_frac * pm)});
}

/// 0.6 P_max to 1.2 P_max over 100 s, then held until `horizon`.
[[nodiscard]] inline RampScenario default_ramp(const NetworkParams& net, const LoadSet& loads,
                                               double horizon = 400.0) {
    return {linear_ramp(net, loads, 0.6, 1.2, 0.0, 100.0), horizon, 1e-3, std::nullopt, 1};
}

struct EventRecord {
    double t = 0.0;
    std::string name;
};

struct RampResult {
    Trajectory trajectory;
    std::vector<EventRecord> events;
    StateLayout layout;
};

[[nodiscard]] inline VcsState ramp_initial_state(const NetworkParams& net, const LoadSet& loads,
                                                 const std::optional<ControllerParams>& ctrl,
                                                 const RampScenario& sc) {
    const bool controlled = ctrl && loads.n_flexible() > 0;
    if (sc.initial) return *sc.initial;
    const auto p0 = sc.schedule.at(sc.schedule.times().front());
    const auto pts = inflexible_equilibria(net, p0);
    if (pts.empty() || pts.front().cls == EquilibriumClass::Es_high) {
        throw std::invalid_argument("run_ramp: initial demands exceed capacity, no low-voltage equilibrium to start from");
    }
    VcsState s{pts.front().g_star, 0.0, {}};
    if (controlled) {
        for (std::size_t i : loads.flexible()) s.ghat.push_back(s.g[i]);
    }
    return s;
}

/// Integrates under the time-varying demand, stopping on voltage collapse.
[[nodiscard]] inline RampResult run_ramp(const NetworkParams& net, const LoadSet& loads,
                                         const std::optional<ControllerParams>& ctrl, const RampScenario& sc) {
    if (sc.schedule.n_loads() != loads.size()) throw ShapeError("run_ramp: schedule / load count mismatch");
    if (!(sc.horizon > 0.0)) throw std::invalid_argument("run_ramp: horizon must be > 0");
    const bool controlled = ctrl && loads.n_flexible() > 0;
    const VcsState x0 = ramp_initial_state(net, loads, ctrl, sc);
    const std::vector<Event> events{collapse_event(net)};
    const IntegratorOptions opts{sc.dt, sc.record_every};

    RampResult out;
    if (controlled) {
        const VcsSystem sys(net, loads, *ctrl, sc.schedule);
        out.layout = sys.layout();
        out.trajectory = integrate(sys, x0, 0.0, sc.horizon, opts, events);
    } else {
        const InflexibleSystem sys(net, sc.schedule);
        out.layout = sys.layout();
        VcsState g_only{x0.g, 0.0, {}};
        out.trajectory = integrate(sys, g_only, 0.0, sc.horizon, opts, events);
    }
    if (out.trajectory.terminated_by) {
        out.events.push_back({out.trajectory.times.back(), *out.trajectory.terminated_by});
    }
    return out;
}

/// Sample indices of the final 10% of samples after the last breakpoint.
[[nodiscard]] inline std::pair<std::size_t, std::size_t> post_transient_window(const Trajectory& traj,
                                                                               double last_breakpoint) {
    const auto first_after = static_cast<std::size_t>(
        std::upper_bound(traj.times.begin(), traj.times.end(), last_breakpoint) - traj.times.begin());
    const std::size_t count = traj.size() - std::min(first_after, traj.size());
    const std::size_t take = std::max<std::size_t>(1, count / 10);
    return {traj.size() - std::min(take, traj.size()), traj.size()};
}

/// Per-load mean mismatch over the post-transient window.
[[nodiscard]] inline std::vector<double> post_transient_mismatch(const Trajectory& traj, double last_breakpoint) {
    const auto [lo, hi] = post_transient_window(traj, last_breakpoint);
    std::vector<double> mean(traj.mismatch.front().size(), 0.0);
    for (std::size_t k = lo; k < hi; ++k) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += traj.mismatch[k][i];
    }
    for (auto& m : mean) m /= static_cast<double>(hi - lo);
    return mean;
}

// ---------------------------------------------------------------------------
// (a, b) grids

enum class TerminalVerdict { converged_to_Es_low, converged_to_Ep, collapsed, other };

[[nodiscard]] inline const char* to_string(TerminalVerdict v) noexcept {
    switch (v) {
        case TerminalVerdict::converged_to_Es_low: return "converged-to-Es_low";
        case TerminalVerdict::converged_to_Ep: return "converged-to-Ep";
        case TerminalVerdict::collapsed: return "collapsed";
        case TerminalVerdict::other: return "other";
    }
    return "?";
}

/// Terminal conductances within this fraction of max(1, |g*|_inf) count as converged.
inline constexpr double kConvergenceRelTolerance = 1e-3;

struct AbCell {
    double a = 0.0;
    double b = 0.0;
    TerminalVerdict verdict = TerminalVerdict::other;
    double terminal_mismatch_norm = 0.0;  // infinity norm of dP at the last sample
    double t_end = 0.0;
};

[[nodiscard]] inline TerminalVerdict terminal_verdict(const NetworkParams& net, const LoadSet& loads,
                                                      const Trajectory& traj) {
    if (traj.collapsed()) return TerminalVerdict::collapsed;
    const auto& g = traj.states.back().g;
    const auto& p0 = traj.demand.back();
    auto close_to = [&](const EquilibriumPoint& pt) {
        double d = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            d = std::max(d, std::abs(g[i] - pt.g_star[i]));
            scale = std::max(scale, std::abs(pt.g_star[i]));
        }
        return d <= kConvergenceRelTolerance * scale;
    };
    const auto es = inflexible_equilibria(net, p0);
    if (!es.empty() && es.front().cls != EquilibriumClass::Es_high && close_to(es.front())) {
        return TerminalVerdict::converged_to_Es_low;
    }
    if (loads.n_flexible() > 0) {
        const auto ep = proportional_allocation_point(net, loads, p0);
        if (ep.exists && close_to(ep)) return TerminalVerdict::converged_to_Ep;
    }
    return TerminalVerdict::other;
}

/// One closed-loop ramp per (a, b) pair, row-major in a.
[[nodiscard]] inline std::vector<AbCell> ab_grid_study(const NetworkParams& net, const LoadSet& loads,
                                                       const RampScenario& sc, std::span<const double> a_values,
                                                       std::span<const double> b_values) {
    std::vector<AbCell> out;
    for (double a : a_values) {
        for (double b : b_values) {
            if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("ab_grid_study: a and b must be positive");
            const auto res = run_ramp(net, loads, ControllerParams(a, b), sc);
            AbCell cell{a, b, terminal_verdict(net, loads, res.trajectory), 0.0, res.trajectory.times.back()};
            for (double m : res.trajectory.mismatch.back()) {
                cell.terminal_mismatch_norm = std::max(cell.terminal_mismatch_norm, std::abs(m));
            }
            out.push_back(cell);
        }
    }
    return out;
}

}  // namespace vcstab
