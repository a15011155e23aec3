#pragma once

// Algebra of a star DC network: one source E behind a line conductance g_l
// feeding n parallel constant-power loads.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcstab {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require_nonnegative(double gN, const char* what) {
    if (!(gN >= 0.0)) {
        throw std::domain_error(std::string(what) + ": total conductance must be >= 0, got " +
                                std::to_string(gN));
    }
}

class NetworkParams {
public:
    NetworkParams(double source_voltage, double line_conductance)
        : E_(source_voltage), g_l_(line_conductance) {
        if (!(E_ > 0.0) || !std::isfinite(E_)) {
            throw std::invalid_argument("NetworkParams: source voltage E must be finite and > 0");
        }
        if (!(g_l_ > 0.0) || !std::isfinite(g_l_)) {
            throw std::invalid_argument("NetworkParams: line conductance g_l must be finite and > 0");
        }
    }

    [[nodiscard]] double E() const noexcept { return E_; }
    [[nodiscard]] double g_l() const noexcept { return g_l_; }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

private:
    double E_;
    double g_l_;
};

struct LoadSpec {
    double p0 = 0.0;
    bool flexible = false;
    double kappa = 0.0;  // ignored for inflexible loads

    friend bool operator==(const LoadSpec&, const LoadSpec&) = default;
};

/// Ordered loads with the flexible (F) / inflexible (I) partition cached.
class LoadSet {
public:
    explicit LoadSet(std::vector<LoadSpec> loads) : loads_(std::move(loads)) {
        if (loads_.empty()) {
            throw std::invalid_argument("LoadSet: at least one load is required");
        }
        for (std::size_t i = 0; i < loads_.size(); ++i) {
            const auto& l = loads_[i];
            const std::string tag = "LoadSet: load " + std::to_string(i + 1);
            if (!(l.p0 >= 0.0) || !std::isfinite(l.p0)) {
                throw std::invalid_argument(tag + " has invalid demand P0 (must be finite and >= 0)");
            }
            if (l.flexible) {
                if (!(l.kappa > 0.0) || !std::isfinite(l.kappa)) {
                    throw std::invalid_argument(tag + " is flexible and needs kappa > 0");
                }
                flexible_.push_back(i);
                kappa_bar_ += l.kappa;
            } else {
                if (!(l.p0 > 0.0)) {
                    throw std::invalid_argument(tag + " is inflexible and needs P0 > 0 (omit zero-demand loads)");
                }
                inflexible_.push_back(i);
            }
            total_demand_ += l.p0;
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return loads_.size(); }
    [[nodiscard]] std::size_t n_flexible() const noexcept { return flexible_.size(); }
    [[nodiscard]] std::size_t n_inflexible() const noexcept { return inflexible_.size(); }
    [[nodiscard]] const LoadSpec& operator[](std::size_t i) const { return loads_[i]; }
    [[nodiscard]] const std::vector<LoadSpec>& loads() const noexcept { return loads_; }
    [[nodiscard]] const std::vector<std::size_t>& flexible() const noexcept { return flexible_; }
    [[nodiscard]] const std::vector<std::size_t>& inflexible() const noexcept { return inflexible_; }
    [[nodiscard]] double kappa_bar() const noexcept { return kappa_bar_; }
    [[nodiscard]] double total_demand() const noexcept { return total_demand_; }

    [[nodiscard]] std::vector<double> demands() const {
        std::vector<double> p(loads_.size());
        for (std::size_t i = 0; i < loads_.size(); ++i) p[i] = loads_[i].p0;
        return p;
    }

    /// Same loads with every demand scaled so that the total equals `total`.
    [[nodiscard]] LoadSet with_total_demand(double total) const {
        if (!(total > 0.0) || !(total_demand_ > 0.0)) {
            throw std::domain_error("LoadSet::with_total_demand: requires positive base and target totals");
        }
        auto scaled = loads_;
        const double s = total / total_demand_;
        for (auto& l : scaled) l.p0 *= s;
        return LoadSet(std::move(scaled));
    }

    /// Same loads with demands replaced (flags and weights kept).
    [[nodiscard]] LoadSet with_demands(std::span<const double> p0) const {
        if (p0.size() != loads_.size()) {
            throw ShapeError("LoadSet::with_demands: expected " + std::to_string(loads_.size()) +
                             " demands, got " + std::to_string(p0.size()));
        }
        auto copy = loads_;
        for (std::size_t i = 0; i < copy.size(); ++i) copy[i].p0 = p0[i];
        return LoadSet(std::move(copy));
    }

    /// Every load relabelled inflexible, for the uncontrolled baseline.
    [[nodiscard]] LoadSet all_inflexible() const {
        auto copy = loads_;
        for (auto& l : copy) {
            l.flexible = false;
            l.kappa = 0.0;
        }
        return LoadSet(std::move(copy));
    }

    friend bool operator==(const LoadSet& a, const LoadSet& b) { return a.loads_ == b.loads_; }

private:
    std::vector<LoadSpec> loads_;
    std::vector<std::size_t> flexible_;
    std::vector<std::size_t> inflexible_;
    double kappa_bar_ = 0.0;
    double total_demand_ = 0.0;
};

using Conductances = std::vector<double>;

[[nodiscard]] inline double total_conductance(std::span<const double> g) {
    return std::accumulate(g.begin(), g.end(), 0.0);
}

/// Bus voltage seen by every load, E g_l / (gN + g_l).
[[nodiscard]] inline double voltage(const NetworkParams& net, double gN) {
    require_nonnegative(gN, "voltage");
    return net.E() * net.g_l() / (gN + net.g_l());
}

/// Network capacity E^2 g_l / 4, attained at gN = g_l.
[[nodiscard]] inline double p_max(const NetworkParams& net) noexcept {
    return net.E() * net.E() * net.g_l() / 4.0;
}

[[nodiscard]] inline double total_power(const NetworkParams& net, double gN) {
    require_nonnegative(gN, "total_power");
    const double eg = net.E() * net.g_l();
    const double d = gN + net.g_l();
    return eg * eg * gN / (d * d);
}

/// d(total_power)/d(gN).
[[nodiscard]] inline double total_power_slope(const NetworkParams& net, double gN) {
    require_nonnegative(gN, "total_power_slope");
    const double eg = net.E() * net.g_l();
    const double d = gN + net.g_l();
    return eg * eg * (net.g_l() - gN) / (d * d * d);
}

struct LoadPowers {
    std::vector<double> power;     // P_i
    std::vector<double> mismatch;  // P_i - P_0,i
    double v = 0.0;
};

[[nodiscard]] inline LoadPowers load_powers(const NetworkParams& net, std::span<const double> p0,
                                            std::span<const double> g) {
    if (g.size() != p0.size()) {
        throw ShapeError("load_powers: conductance vector has length " + std::to_string(g.size()) +
                         " but there are " + std::to_string(p0.size()) + " loads");
    }
    LoadPowers out;
    out.v = voltage(net, total_conductance(g));
    const double v2 = out.v * out.v;
    out.power.resize(g.size());
    out.mismatch.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out.power[i] = v2 * g[i];
        out.mismatch[i] = out.power[i] - p0[i];
    }
    return out;
}

[[nodiscard]] inline LoadPowers load_powers(const NetworkParams& net, const LoadSet& loads,
                                            std::span<const double> g) {
    const auto p0 = loads.demands();
    return load_powers(net, std::span<const double>(p0), g);
}

}  // namespace vcstab
