// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "vcstab/experiments.hpp"
#include "vcstab/stability.hpp"

using namespace vcstab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    const char* name;
    double time_limit;  // seconds
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const NetworkParams kNet(2.0, 1.0);
const ControllerParams kCtrl(0.1, 0.1);

Outcome capacity_identity() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> E(0.1, 10.0), gl(0.05, 5.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const NetworkParams net(E(rng), gl(rng));
        const int n = 1'000'000;
        const double hi = 10.0 * net.g_l();
        double best = 0.0;
        for (int i = 0; i <= n; ++i) best = std::max(best, total_power(net, hi * i / n));
        worst = std::max(worst, std::abs(best - p_max(net)) / p_max(net));
    }
    return {worst <= 1e-9, fmt("max rel err %.2e over 20 networks", worst)};
}

Outcome overload_collapse() {
    const double eps = 0.2;
    const std::vector<double> p0{0.36 * (1.0 + eps), 0.36 * (1.0 + eps), 0.28 * (1.0 + eps)};
    const InflexibleSystem sys(kNet, DemandSchedule::constant(p0));
    const std::vector<Event> ev{collapse_event(kNet)};
    const auto tr = integrate(sys, VcsState{{0.0, 0.0, 0.0}, 0.0, {}}, 0.0, 2000.0, {1e-3, 1}, ev);
    double min_slope = 1e300;
    for (std::size_t k = 1; k < tr.size(); ++k) {
        const double s = (total_conductance(tr.states[k].g) - total_conductance(tr.states[k - 1].g)) /
                         (tr.times[k] - tr.times[k - 1]);
        min_slope = std::min(min_slope, s);
    }
    const bool ok = min_slope >= eps - 1e-6 && tr.collapsed();
    return {ok, fmt("min step slope %.9f (bound %.6f), collapse=%d at t=%.3f", min_slope, eps - 1e-6,
                    static_cast<int>(tr.collapsed()), tr.times.back())};
}

Outcome quadratic_roots_check() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    bool straddle = true;
    for (int k = 0; k < 50; ++k) {
        double p = u(rng) * p_max(kNet);
        if (p == 0.0) p = 0.5;
        const auto r = solve_total_conductance(kNet, p);
        if (r.size() != 2) return {false, fmt("p0n=%.6f gave %zu roots", p, r.size())};
        worst = std::max(worst, std::abs(r[0] * r[1] - 1.0));
        straddle = straddle && r[0] < 1.0 && r[1] > 1.0;
    }
    const auto at = solve_total_conductance(kNet, p_max(kNet));
    const bool dbl = at.size() == 1 && at[0] == kNet.g_l();
    const bool empty = solve_total_conductance(kNet, 1.0001 * p_max(kNet)).empty() &&
                       solve_total_conductance(kNet, 2.0 * p_max(kNet)).empty();
    return {worst <= 1e-10 && straddle && dbl && empty,
            fmt("max |product - g_l^2| %.2e, straddle=%d, double root=%d, empty above=%d", worst,
                static_cast<int>(straddle), static_cast<int>(dbl), static_cast<int>(empty))};
}

Outcome uncontrolled_boundary() {
    const LoadSet loads({{0.5, false, 0.0}, {0.3, false, 0.0}, {0.2, false, 0.0}});
    int checked = 0;
    bool ok = true;
    for (int k = 1; k <= 200; ++k) {
        const double p0n = 0.005 * k;  // up to and including P_max
        const auto p0 = scaled_demands(loads, p0n);
        for (const auto& pt : inflexible_equilibria(kNet, p0)) {
            const Verdict v = classify(pt, kNet, loads, p0, std::nullopt);
            const double gap = pt.gN_star - kNet.g_l();
            const Verdict expect = std::abs(gap) < 1e-10 ? Verdict::marginal
                                   : gap < 0.0           ? Verdict::stable
                                                         : Verdict::unstable;
            const double vv = pt.v_star * pt.v_star;
            const double lambda_n = 2.0 * vv * pt.gN_star / (pt.gN_star + kNet.g_l()) - vv;
            double top = -1e300;
            for (auto z : numeric_eigenvalues(jacobian_inflexible(kNet, pt.g_star))) top = std::max(top, z.real());
            const bool sign_ok = expect == Verdict::marginal ? std::abs(lambda_n) < 1e-9
                                 : expect == Verdict::stable ? lambda_n < 0.0
                                                             : lambda_n > 0.0;
            ok = ok && v == expect && sign_ok && std::abs(top - lambda_n) < 1e-9;
            ++checked;
        }
    }
    return {ok, fmt("%d equilibria classified, verdicts and lambda_n signs agree=%d", checked, static_cast<int>(ok))};
}

Outcome spectrum_oracle() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int draws = 0;
    for (int k = 0; k < 200; ++k) {
        const NetworkParams net(0.5 + 3.0 * u(rng), 0.2 + 2.0 * u(rng));
        const std::size_t n = 1 + k % 8;
        std::vector<LoadSpec> specs;
        VcsState s;
        for (std::size_t i = 0; i < n; ++i) {
            const bool flex = i == 0 || u(rng) < 0.5;
            specs.push_back({0.05 + u(rng), flex, flex ? 0.2 + 2.0 * u(rng) : 0.0});
            s.g.push_back(2.0 * u(rng));
            if (flex) s.ghat.push_back(2.0 * u(rng));
        }
        s.phi = 2.0 * u(rng) - 1.0;
        const LoadSet loads(specs);
        const auto r = vcs_closed_form_spectrum(net, loads, s, ControllerParams(0.01 + u(rng), 0.3 * u(rng)));
        worst = std::max(worst, r.max_match_error);
        ++draws;
    }
    // degenerate filter rate
    const LoadSet loads({{0.4, true, 1.0}, {0.2, false, 0.0}, {0.1, false, 0.0}});
    const VcsState s{{0.5, 0.2, 0.1}, 0.05, {0.45}};
    const double v = voltage(kNet, 0.8), v2 = v * v;
    const double a = v2 - 2.0 * v2 * 0.3 / 1.8;
    const auto r = vcs_closed_form_spectrum(kNet, loads, s, ControllerParams(a, 0.1));
    double nearest = 1e300;
    for (auto z : r.oracle_eigenvalues) nearest = std::min(nearest, std::abs(z + a));
    const bool ok = worst <= 1e-8 && r.degenerate_a && nearest < 1e-8 && r.max_match_error <= 1e-8;
    return {ok, fmt("%d draws, max match err %.2e; degenerate case flagged=%d, |lambda + a| %.1e", draws, worst,
                    static_cast<int>(r.degenerate_a), nearest)};
}

Outcome proportional_shedding() {
    const LoadSet loads({{0.3, true, 1.0}, {0.3, true, 2.0}, {0.4, false, 0.0}});
    const auto sc = default_ramp(kNet, loads);
    const auto res = run_ramp(kNet, loads, kCtrl, sc);
    if (res.trajectory.collapsed()) return {false, "collapsed"};
    const auto dP = post_transient_mismatch(res.trajectory, sc.schedule.last_breakpoint());
    const double pm = p_max(kNet);
    const double ratio = dP[0] / dP[1];
    const double shed = dP[0] + dP[1];
    const double target = pm - sc.schedule.values().back()[0] - sc.schedule.values().back()[1] -
                          sc.schedule.values().back()[2];
    const bool ok = std::abs(ratio - 0.5) <= 0.02 * 0.5 && std::abs(dP[2]) <= 1e-3 * pm &&
                    std::abs(shed - target) <= 1e-3 * pm;
    return {ok, fmt("dP1/dP2 = %.6f, dP3 = %.2e, shed = %.6f (target %.6f)", ratio, dP[2], shed, target)};
}

Outcome routh_signs() {
    auto scaled = [](double p0n) { return LoadSet({{0.7 / 1.2 * p0n, true, 1.0}, {0.5 / 1.2 * p0n, false, 0.0}}); };
    const auto over = scaled(1.2);
    const auto c_over = routh_first_column(vcs_quartic(kNet, over, kCtrl, 1.0, 1.2));
    bool all_pos = true;
    for (double e : c_over.entries) all_pos = all_pos && e > 0.0;
    const bool v_over = classify(proportional_allocation_point(kNet, over, kCtrl), kNet, over, kCtrl) == Verdict::stable;

    const auto under = scaled(0.75);
    const auto c_under = routh_first_column(vcs_quartic(kNet, under, kCtrl, 1.0, 0.75));
    const bool v_under =
        classify(proportional_allocation_point(kNet, under, kCtrl), kNet, under, kCtrl) == Verdict::unstable;

    bool low_ok = true;
    for (double p : {0.5, 0.75, 0.9}) {
        const auto l = scaled(p);
        const auto es = load_satisfaction_set(kNet, l, kCtrl);
        low_ok = low_ok && !es.empty() && es.front().cls == EquilibriumClass::Es_low &&
                 classify(es.front(), kNet, l, kCtrl) == Verdict::stable;
    }
    const bool ok = all_pos && v_over && c_under.entries[4] < 0.0 && v_under && low_ok;
    return {ok, fmt("overload column (%.4g, %.4g, %.4g, %.4g, %.4g); underload d1 = %.4g; low branch stable=%d",
                    c_over.entries[0], c_over.entries[1], c_over.entries[2], c_over.entries[3], c_over.entries[4],
                    c_under.entries[4], static_cast<int>(low_ok))};
}

Outcome shed_band_check() {
    double worst = 0.0, prev_m = 0.0, prev_M = 1e300;
    bool mono = true;
    for (double b : {0.05, 0.1, 0.13}) {
        const auto band = shed_band(kNet, b);
        worst = std::max(worst, std::abs(tilde_lambda(kNet, kNet.g_l() + band.m_b) + b));
        worst = std::max(worst, std::abs(tilde_lambda(kNet, kNet.g_l() + band.M_b) + b));
        mono = mono && band.m_b > prev_m && band.M_b < prev_M;
        prev_m = band.m_b;
        prev_M = band.M_b;
    }
    const double at2 = std::abs(tilde_lambda(kNet, 2.0 * kNet.g_l()) + 4.0 / 27.0);
    return {worst < 1e-12 && mono && at2 < 1e-12,
            fmt("max residual %.2e, monotone=%d, |lambda~(2 g_l) + E^2/27| = %.1e", worst, static_cast<int>(mono), at2)};
}

Outcome bifurcation_structure() {
    const LoadSet loads({{0.3, true, 1.0}, {0.3, true, 2.0}, {0.4, false, 0.0}});
    const std::vector<double> grid{0.25, 0.5, 0.75, 0.9, 1.0, 1.05, 1.2, 1.5};
    const auto inf = bifurcation_sweep(kNet, loads, std::nullopt, grid);
    const auto vcs = bifurcation_sweep(kNet, loads, kCtrl, grid);
    bool counts = true;
    for (double p : grid) {
        const std::size_t ni = p < 1.0 ? 2 : p == 1.0 ? 1 : 0;
        const std::size_t nv = p < 1.0 ? 3 : 1;
        counts = counts && inf.branch_count(p) == ni && vcs.branch_count(p) == nv;
    }
    int confirmed = 0, failed = 0;
    double worst = 0.0;
    for (const auto* res : {&inf, &vcs}) {
        const auto ctrl = res == &vcs ? std::optional<ControllerParams>(kCtrl) : std::nullopt;
        for (const auto& r : res->rows) {
            if (!r.verdict || *r.verdict != Verdict::stable) continue;
            const double d = perturbation_return_distance(kNet, loads, r.demands, ctrl, *r.point, 600.0);
            worst = std::max(worst, d);
            (d < 1e-6 ? confirmed : failed)++;
        }
    }
    return {counts && failed == 0 && confirmed > 0,
            fmt("branch counts 2->1->0 and 3->1 = %d; %d stable rows returned (worst %.1e), %d did not",
                static_cast<int>(counts), confirmed, worst, failed)};
}

Outcome inflexible_overload_exit() {
    const std::string cmd =
        std::string(VCSTAB_BINARY) + " simulate --config " + VCSTAB_CONFIG_DIR "/ramp_inflexible_overload.json" +
        " --out /dev/null > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code == 4, fmt("exit code %d", code)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"capacity-identity", 1.0, capacity_identity},
        {"overload-collapse-rate", 5.0, overload_collapse},
        {"total-conductance-roots", 1.0, quadratic_roots_check},
        {"uncontrolled-stability-boundary", 1.0, uncontrolled_boundary},
        {"closed-form-spectrum-oracle", 10.0, spectrum_oracle},
        {"proportional-shedding", 10.0, proportional_shedding},
        {"routh-signs", 1.0, routh_signs},
        {"shed-band", 1.0, shed_band_check},
        {"bifurcation-structure", 30.0, bifurcation_structure},
        {"inflexible-overload-collapse", 5.0, inflexible_overload_exit},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && secs <= c.time_limit;
        failures += !pass;
        std::printf("%s  %-32s %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    c.time_limit);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
