#pragma once

// Load dynamics for the uncontrolled system and the VCS closed loop, plus a
// deterministic fixed-step RK4 integrator with terminating events.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vcstab/network.hpp"

namespace vcstab {

/// Closed-loop state (g, phi, ghat). The uncontrolled system uses g only.
struct VcsState {
    Conductances g;
    double phi = 0.0;
    std::vector<double> ghat;  // one entry per flexible load, in LoadSet::flexible() order

    friend bool operator==(const VcsState&, const VcsState&) = default;
};

class ControllerParams {
public:
    ControllerParams(double a, double b) : a_(a), b_(b) {
        if (!(a_ > 0.0) || !std::isfinite(a_)) {
            throw std::invalid_argument("ControllerParams: damping-filter rate a must be finite and > 0");
        }
        if (!(b_ >= 0.0) || !std::isfinite(b_)) {
            throw std::invalid_argument("ControllerParams: damping gain b must be finite and >= 0");
        }
    }

    [[nodiscard]] double a() const noexcept { return a_; }
    [[nodiscard]] double b() const noexcept { return b_; }

    friend bool operator==(const ControllerParams&, const ControllerParams&) = default;

private:
    double a_;
    double b_;
};

/// Advisory checks on (a, b). `gN_upper` bounds the total conductance and so
/// fixes v_min = voltage(gN_upper).
[[nodiscard]] inline std::vector<std::string> controller_warnings(const NetworkParams& net,
                                                                  const ControllerParams& ctrl,
                                                                  std::optional<double> gN_upper = {}) {
    std::vector<std::string> out;
    const double b_limit = net.E() * net.E() / 27.0;
    if (!(ctrl.b() > 0.0 && ctrl.b() < b_limit)) {
        out.push_back("b = " + std::to_string(ctrl.b()) + " lies outside (0, E^2/27) = (0, " +
                      std::to_string(b_limit) + ")");
    }
    if (gN_upper) {
        const double vmin = voltage(net, *gN_upper);
        if (ctrl.a() >= vmin * vmin) {
            out.push_back("a = " + std::to_string(ctrl.a()) + " >= v_min^2 = " + std::to_string(vmin * vmin) +
                          " for total conductance up to " + std::to_string(*gN_upper));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Right-hand sides

/// g_dot_i = -(P_i - P_0,i) for every load, whatever its flag.
[[nodiscard]] inline std::vector<double> inflexible_rhs(const NetworkParams& net, std::span<const double> p0,
                                                        std::span<const double> g) {
    auto lp = load_powers(net, p0, g);
    for (auto& d : lp.mismatch) d = -d;
    return std::move(lp.mismatch);
}

[[nodiscard]] inline std::vector<double> inflexible_rhs(const NetworkParams& net, const LoadSet& loads,
                                                        std::span<const double> g) {
    const auto p0 = loads.demands();
    return inflexible_rhs(net, std::span<const double>(p0), g);
}

inline void check_state_shape(const LoadSet& loads, const VcsState& s, const char* where) {
    if (s.g.size() != loads.size()) {
        throw ShapeError(std::string(where) + ": g has length " + std::to_string(s.g.size()) + ", expected " +
                         std::to_string(loads.size()));
    }
    if (s.ghat.size() != loads.n_flexible()) {
        throw ShapeError(std::string(where) + ": ghat has length " + std::to_string(s.ghat.size()) +
                         ", expected " + std::to_string(loads.n_flexible()));
    }
}

/// Time derivative of the closed loop, returned in the same shape as the state.
[[nodiscard]] inline VcsState vcs_rhs(const NetworkParams& net, const LoadSet& loads, std::span<const double> p0,
                                      const VcsState& s, const ControllerParams& ctrl) {
    check_state_shape(loads, s, "vcs_rhs");
    VcsState d;
    d.g = inflexible_rhs(net, p0, s.g);
    const auto& F = loads.flexible();
    d.ghat.resize(F.size());
    for (std::size_t k = 0; k < F.size(); ++k) {
        const std::size_t i = F[k];
        d.g[i] += -loads[i].kappa * s.phi + ctrl.b() * (s.ghat[k] - s.g[i]);
        d.ghat[k] = -ctrl.a() * (s.ghat[k] - s.g[i]);
    }
    const double gN = total_conductance(s.g);
    double demand = 0.0;
    for (double p : p0) demand += p;
    d.phi = (total_power(net, gN) - demand) * total_power_slope(net, gN);
    return d;
}

[[nodiscard]] inline VcsState vcs_rhs(const NetworkParams& net, const LoadSet& loads, const VcsState& s,
                                      const ControllerParams& ctrl) {
    const auto p0 = loads.demands();
    return vcs_rhs(net, loads, std::span<const double>(p0), s, ctrl);
}

// ---------------------------------------------------------------------------
// Demand schedules

/// Piecewise-linear per-load demand P_0,i(t), held constant outside the breakpoints.
class DemandSchedule {
public:
    DemandSchedule(std::vector<double> times, std::vector<std::vector<double>> values)
        : times_(std::move(times)), values_(std::move(values)) {
        if (times_.empty() || times_.size() != values_.size()) {
            throw std::invalid_argument("DemandSchedule: need one demand vector per breakpoint (and at least one)");
        }
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (!(times_[k] > times_[k - 1])) {
                throw std::invalid_argument("DemandSchedule: breakpoints must be strictly increasing");
            }
        }
        for (const auto& row : values_) {
            if (row.size() != values_.front().size()) {
                throw ShapeError("DemandSchedule: every breakpoint must list the same number of loads");
            }
            for (double p : row) {
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    throw std::invalid_argument("DemandSchedule: demands must be finite and >= 0");
                }
            }
        }
    }

    static DemandSchedule constant(std::vector<double> p0) { return DemandSchedule({0.0}, {std::move(p0)}); }

    [[nodiscard]] std::size_t n_loads() const noexcept { return values_.front().size(); }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] const std::vector<std::vector<double>>& values() const noexcept { return values_; }
    [[nodiscard]] double last_breakpoint() const noexcept { return times_.back(); }

    void at(double t, std::span<double> out) const {
        if (t <= times_.front()) {
            std::copy(values_.front().begin(), values_.front().end(), out.begin());
            return;
        }
        if (t >= times_.back()) {
            std::copy(values_.back().begin(), values_.back().end(), out.begin());
            return;
        }
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - times_.begin());
        const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = values_[k - 1][i] + w * (values_[k][i] - values_[k - 1][i]);
        }
    }

    [[nodiscard]] std::vector<double> at(double t) const {
        std::vector<double> out(n_loads());
        at(t, out);
        return out;
    }

    friend bool operator==(const DemandSchedule&, const DemandSchedule&) = default;

private:
    std::vector<double> times_;
    std::vector<std::vector<double>> values_;
};

// ---------------------------------------------------------------------------
// Systems in packed form: x = [g_1..g_n, phi, ghat_1..ghat_nF]

struct StateLayout {
    std::size_t n = 0;
    std::size_t n_flexible = 0;
    bool controlled = false;

    [[nodiscard]] std::size_t size() const noexcept { return controlled ? n + 1 + n_flexible : n; }
};

[[nodiscard]] inline std::vector<double> pack(const StateLayout& layout, const VcsState& s) {
    std::vector<double> x(s.g);
    if (layout.controlled) {
        x.push_back(s.phi);
        x.insert(x.end(), s.ghat.begin(), s.ghat.end());
    }
    return x;
}

[[nodiscard]] inline VcsState unpack(const StateLayout& layout, std::span<const double> x) {
    VcsState s;
    s.g.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(layout.n));
    if (layout.controlled) {
        s.phi = x[layout.n];
        s.ghat.assign(x.begin() + static_cast<std::ptrdiff_t>(layout.n + 1), x.end());
    }
    return s;
}

/// Uncontrolled loads, every one running g_dot_i = -dP_i.
class InflexibleSystem {
public:
    InflexibleSystem(NetworkParams net, DemandSchedule demand) : net_(net), demand_(std::move(demand)) {}

    [[nodiscard]] const NetworkParams& net() const noexcept { return net_; }
    [[nodiscard]] const DemandSchedule& demand() const noexcept { return demand_; }
    [[nodiscard]] StateLayout layout() const noexcept { return {demand_.n_loads(), 0, false}; }
    [[nodiscard]] std::optional<ControllerParams> controller() const { return std::nullopt; }

    void derivative(double t, std::span<const double> x, std::span<double> dx, std::span<double> p0) const {
        demand_.at(t, p0);
        const double gN = total_conductance(x);
        const double v = voltage(net_, gN < 0.0 ? 0.0 : gN);
        const double v2 = v * v;
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = -(v2 * x[i] - p0[i]);
    }

private:
    NetworkParams net_;
    DemandSchedule demand_;
};

class VcsSystem {
public:
    VcsSystem(NetworkParams net, LoadSet loads, ControllerParams ctrl, DemandSchedule demand)
        : net_(net), loads_(std::move(loads)), ctrl_(ctrl), demand_(std::move(demand)) {
        if (demand_.n_loads() != loads_.size()) {
            throw ShapeError("VcsSystem: demand schedule and load set disagree on the number of loads");
        }
    }

    [[nodiscard]] const NetworkParams& net() const noexcept { return net_; }
    [[nodiscard]] const LoadSet& loads() const noexcept { return loads_; }
    [[nodiscard]] const DemandSchedule& demand() const noexcept { return demand_; }
    [[nodiscard]] StateLayout layout() const noexcept { return {loads_.size(), loads_.n_flexible(), true}; }
    [[nodiscard]] std::optional<ControllerParams> controller() const { return ctrl_; }

    void derivative(double t, std::span<const double> x, std::span<double> dx, std::span<double> p0) const {
        demand_.at(t, p0);
        const std::size_t n = loads_.size();
        const auto g = x.first(n);
        const double phi = x[n];
        const auto ghat = x.subspan(n + 1);
        double gN = total_conductance(g);
        if (gN < 0.0) gN = 0.0;
        const double v = voltage(net_, gN);
        const double v2 = v * v;
        double demand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = -(v2 * g[i] - p0[i]);
            demand += p0[i];
        }
        const auto& F = loads_.flexible();
        for (std::size_t k = 0; k < F.size(); ++k) {
            const std::size_t i = F[k];
            dx[i] += -loads_[i].kappa * phi + ctrl_.b() * (ghat[k] - g[i]);
            dx[n + 1 + k] = -ctrl_.a() * (ghat[k] - g[i]);
        }
        dx[n] = (total_power(net_, gN) - demand) * total_power_slope(net_, gN);
    }

private:
    NetworkParams net_;
    LoadSet loads_;
    ControllerParams ctrl_;
    DemandSchedule demand_;
};

// ---------------------------------------------------------------------------
// Collapse

inline constexpr double kCollapseVoltageFraction = 0.01;

[[nodiscard]] inline bool detect_collapse(const VcsState& s, const NetworkParams& net) {
    return voltage(net, std::max(0.0, total_conductance(s.g))) < kCollapseVoltageFraction * net.E();
}

// ---------------------------------------------------------------------------
// Integration

struct Event {
    std::string name;
    std::function<bool(double t, const VcsState&)> fires;
};

[[nodiscard]] inline Event collapse_event(const NetworkParams& net) {
    return {"collapse", [net](double, const VcsState& s) { return detect_collapse(s, net); }};
}

struct Trajectory {
    std::vector<double> times;
    std::vector<VcsState> states;
    // Derived per sample.
    std::vector<double> v;
    std::vector<std::vector<double>> power;
    std::vector<std::vector<double>> mismatch;
    std::vector<std::vector<double>> demand;

    std::optional<std::string> terminated_by;  // event name, empty when the horizon was reached
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool collapsed() const noexcept { return terminated_by && *terminated_by == "collapse"; }
};

struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, Trajectory partial_)
        : std::runtime_error(what), partial(std::move(partial_)) {}
    Trajectory partial;
};

struct IntegratorOptions {
    double dt = 1e-3;
    std::size_t record_every = 1;  // keep one sample per this many steps (first, last and event samples always kept)
};

namespace detail {

inline void record(Trajectory& traj, const NetworkParams& net, const StateLayout& layout, double t,
                   std::span<const double> x, std::span<const double> p0) {
    auto s = unpack(layout, x);
    auto lp = load_powers(net, p0, s.g);
    traj.times.push_back(t);
    traj.v.push_back(lp.v);
    traj.power.push_back(std::move(lp.power));
    traj.mismatch.push_back(std::move(lp.mismatch));
    traj.demand.emplace_back(p0.begin(), p0.end());
    traj.states.push_back(std::move(s));
}

}  // namespace detail

/// Classical RK4 on [t0, t1] with step dt; g is clamped at zero after every
/// step and the events are checked on every accepted step.
template <class System>
[[nodiscard]] Trajectory integrate(const System& sys, const VcsState& initial, double t0, double t1,
                                   const IntegratorOptions& opts = {}, std::span<const Event> events = {}) {
    if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw std::invalid_argument("integrate: dt must be > 0");
    if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 >= t0)) {
        throw std::invalid_argument("integrate: time span must be finite with t1 >= t0");
    }
    if (opts.record_every == 0) throw std::invalid_argument("integrate: record_every must be >= 1");

    const StateLayout layout = sys.layout();
    auto x = pack(layout, initial);
    if (x.size() != layout.size() || initial.g.size() != layout.n ||
        (layout.controlled && initial.ghat.size() != layout.n_flexible)) {
        throw ShapeError("integrate: initial state does not match the system layout");
    }
    const std::size_t m = x.size();
    std::vector<double> k1(m), k2(m), k3(m), k4(m), w(m), p0(layout.n);

    const auto ctrl = sys.controller();
    bool warned_a = false;
    auto check_a = [&](Trajectory& traj, double t, double v) {
        if (ctrl && !warned_a && ctrl->a() >= v * v) {
            warned_a = true;
            traj.warnings.push_back("a = " + std::to_string(ctrl->a()) + " >= v^2 = " + std::to_string(v * v) +
                                    " at t = " + std::to_string(t));
        }
    };

    Trajectory traj;
    sys.demand().at(t0, p0);
    detail::record(traj, sys.net(), layout, t0, x, p0);
    check_a(traj, t0, traj.v.back());

    const double span = t1 - t0;
    const auto steps = static_cast<std::size_t>(std::ceil(span / opts.dt - 1e-9));
    double t = t0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double t_next = (k == steps) ? t1 : t0 + static_cast<double>(k) * opts.dt;
        const double h = t_next - t;
        sys.derivative(t, x, k1, p0);
        for (std::size_t j = 0; j < m; ++j) w[j] = x[j] + 0.5 * h * k1[j];
        sys.derivative(t + 0.5 * h, w, k2, p0);
        for (std::size_t j = 0; j < m; ++j) w[j] = x[j] + 0.5 * h * k2[j];
        sys.derivative(t + 0.5 * h, w, k3, p0);
        for (std::size_t j = 0; j < m; ++j) w[j] = x[j] + h * k3[j];
        sys.derivative(t_next, w, k4, p0);
        for (std::size_t j = 0; j < m; ++j) w[j] = x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        for (std::size_t j = 0; j < layout.n; ++j) w[j] = std::max(w[j], 0.0);

        if (!std::all_of(w.begin(), w.end(), [](double q) { return std::isfinite(q); })) {
            throw IntegrationError("integrate: non-finite state at t = " + std::to_string(t_next), std::move(traj));
        }
        x.swap(w);
        t = t_next;

        const VcsState s = unpack(layout, x);
        std::optional<std::string> fired;
        for (const auto& ev : events) {
            if (ev.fires(t, s)) {
                fired = ev.name;
                break;
            }
        }
        if (fired || k == steps || k % opts.record_every == 0) {
            sys.demand().at(t, p0);
            detail::record(traj, sys.net(), layout, t, x, p0);
            check_a(traj, t, traj.v.back());
        }
        if (fired) {
            traj.terminated_by = fired;
            break;
        }
    }
    return traj;
}

}  // namespace vcstab
