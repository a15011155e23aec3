#pragma once

// Run configuration (JSON), result serialization (CSV / JSON) and the four
// subcommands behind the `vcstab` executable. Every command writes its
// result to a string so it can be driven in-process.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcstab/dynamics.hpp"
#include "vcstab/equilibria.hpp"
#include "vcstab/experiments.hpp"
#include "vcstab/network.hpp"
#include "vcstab/stability.hpp"

namespace vcstab::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNoEquilibrium = 3, kCollapse = 4 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct RampSpec {
    double from = 0.6;  // fractions of P_max
    double to = 1.2;
    double t_start = 0.0;
    double t_end = 100.0;
    friend bool operator==(const RampSpec&, const RampSpec&) = default;
};

struct ScheduleSpec {
    std::vector<double> times;
    std::vector<std::vector<double>> demands;
    friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

struct ScenarioConfig {
    std::optional<RampSpec> ramp;
    std::optional<ScheduleSpec> schedule;
    double horizon = 400.0;
    double dt = 1e-3;
    std::size_t record_every = 1;
    std::optional<VcsState> initial;
    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct PointSpec {
    std::optional<EquilibriumClass> branch;
    std::optional<VcsState> state;
    friend bool operator==(const PointSpec&, const PointSpec&) = default;
};

struct RunConfig {
    NetworkParams network{1.0, 1.0};
    LoadSet loads{{LoadSpec{1.0, false, 0.0}}};
    std::optional<ControllerParams> controller;
    std::optional<ScenarioConfig> scenario;
    std::optional<std::vector<double>> sweep;
    std::optional<PointSpec> point;
    std::optional<std::string> out;
    std::optional<double> dt;
    std::optional<double> horizon;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline double number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!j.at(key).is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
    return j.at(key).get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(where + " must contain only numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline VcsState parse_state(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("g")) throw ConfigError(where + ": state needs \"g\"");
    VcsState s;
    s.g = numbers(j.at("g"), where + ".g");
    s.phi = j.contains("phi") ? number(j, "phi", where) : 0.0;
    if (j.contains("ghat")) s.ghat = numbers(j.at("ghat"), where + ".ghat");
    return s;
}

inline json state_json(const VcsState& s) { return {{"g", s.g}, {"phi", s.phi}, {"ghat", s.ghat}}; }

inline EquilibriumClass parse_class(const std::string& s) {
    for (auto c : {EquilibriumClass::Es_low, EquilibriumClass::Es_high, EquilibriumClass::Ep,
                   EquilibriumClass::boundary}) {
        if (s == to_string(c)) return c;
    }
    throw ConfigError("point.branch must be one of Es_low, Es_high, Ep, boundary; got \"" + s + "\"");
}

}  // namespace detail

/// Parses and validates a configuration document.
[[nodiscard]] inline RunConfig parse_config(const json& j) {
    using detail::number;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        if (!j.contains("network")) throw ConfigError("config: missing \"network\"");
        const auto& jn = j.at("network");
        RunConfig cfg;
        cfg.network = NetworkParams(number(jn, "E", "network"), number(jn, "g_l", "network"));

        if (!j.contains("loads") || !j.at("loads").is_array()) throw ConfigError("config: \"loads\" must be an array");
        std::vector<LoadSpec> loads;
        for (std::size_t i = 0; i < j.at("loads").size(); ++i) {
            const auto& jl = j.at("loads").at(i);
            const std::string where = "loads[" + std::to_string(i) + "]";
            LoadSpec l;
            l.p0 = number(jl, "P0", where);
            if (jl.contains("flexible")) {
                if (!jl.at("flexible").is_boolean()) throw ConfigError(where + ": \"flexible\" must be a boolean");
                l.flexible = jl.at("flexible").get<bool>();
            }
            if (l.flexible) l.kappa = number(jl, "kappa", where);
            loads.push_back(l);
        }
        cfg.loads = LoadSet(std::move(loads));

        if (j.contains("controller") && !j.at("controller").is_null()) {
            const auto& jc = j.at("controller");
            cfg.controller = ControllerParams(number(jc, "a", "controller"), number(jc, "b", "controller"));
        }

        int modes = 0;
        if (j.contains("scenario")) {
            ++modes;
            const auto& js = j.at("scenario");
            ScenarioConfig sc;
            if (js.contains("ramp") && js.contains("schedule")) {
                throw ConfigError("scenario: give either \"ramp\" or \"schedule\", not both");
            }
            if (js.contains("ramp")) {
                const auto& jr = js.at("ramp");
                RampSpec r;
                r.from = jr.contains("from") ? number(jr, "from", "scenario.ramp") : r.from;
                r.to = jr.contains("to") ? number(jr, "to", "scenario.ramp") : r.to;
                r.t_start = jr.contains("t_start") ? number(jr, "t_start", "scenario.ramp") : r.t_start;
                r.t_end = jr.contains("t_end") ? number(jr, "t_end", "scenario.ramp") : r.t_end;
                if (!(r.from >= 0.0) || !(r.to >= 0.0)) throw ConfigError("scenario.ramp: fractions must be >= 0");
                if (!(r.t_end >= r.t_start)) throw ConfigError("scenario.ramp: t_end must be >= t_start");
                sc.ramp = r;
            } else if (js.contains("schedule")) {
                ScheduleSpec s;
                for (const auto& bp : js.at("schedule")) {
                    s.times.push_back(number(bp, "t", "scenario.schedule"));
                    if (!bp.contains("P0")) throw ConfigError("scenario.schedule: breakpoint needs \"P0\"");
                    s.demands.push_back(detail::numbers(bp.at("P0"), "scenario.schedule.P0"));
                }
                DemandSchedule check(s.times, s.demands);
                if (check.n_loads() != cfg.loads.size()) {
                    throw ConfigError("scenario.schedule: each breakpoint must list one demand per load");
                }
                sc.schedule = std::move(s);
            } else {
                sc.ramp = RampSpec{};
            }
            if (js.contains("horizon")) sc.horizon = number(js, "horizon", "scenario");
            if (js.contains("dt")) sc.dt = number(js, "dt", "scenario");
            if (js.contains("record_every")) {
                const double k = number(js, "record_every", "scenario");
                if (!(k >= 1.0) || k != std::floor(k)) throw ConfigError("scenario.record_every must be an integer >= 1");
                sc.record_every = static_cast<std::size_t>(k);
            }
            if (!(sc.horizon > 0.0)) throw ConfigError("scenario.horizon must be > 0");
            if (!(sc.dt > 0.0)) throw ConfigError("scenario.dt must be > 0");
            if (js.contains("initial")) sc.initial = detail::parse_state(js.at("initial"), "scenario.initial");
            cfg.scenario = std::move(sc);
        }
        if (j.contains("sweep")) {
            ++modes;
            const auto& jw = j.at("sweep");
            std::vector<double> grid;
            if (jw.contains("p0n")) {
                grid = detail::numbers(jw.at("p0n"), "sweep.p0n");
            } else if (jw.contains("from") && jw.contains("to") && jw.contains("count")) {
                const double a = number(jw, "from", "sweep");
                const double b = number(jw, "to", "sweep");
                const double n = number(jw, "count", "sweep");
                if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError("sweep.count must be an integer >= 1");
                const auto count = static_cast<std::size_t>(n);
                for (std::size_t k = 0; k < count; ++k) {
                    grid.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
                }
            } else {
                throw ConfigError("sweep: give \"p0n\" (list) or \"from\", \"to\", \"count\"");
            }
            if (grid.empty()) throw ConfigError("sweep: grid is empty");
            for (double p : grid) {
                if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("sweep: grid values must be finite and >= 0");
            }
            cfg.sweep = std::move(grid);
        }
        if (j.contains("point")) {
            ++modes;
            const auto& jp = j.at("point");
            PointSpec p;
            if (jp.contains("branch")) p.branch = detail::parse_class(jp.at("branch").get<std::string>());
            if (jp.contains("state")) p.state = detail::parse_state(jp.at("state"), "point.state");
            if (p.branch && p.state) throw ConfigError("point: give either \"branch\" or \"state\", not both");
            cfg.point = std::move(p);
        }
        if (modes > 1) throw ConfigError("config: give at most one of \"scenario\", \"sweep\", \"point\"");

        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("dt")) cfg.dt = number(j, "dt", "config");
        if (j.contains("horizon")) cfg.horizon = number(j, "horizon", "config");
        if (cfg.dt && !(*cfg.dt > 0.0)) throw ConfigError("config: dt must be > 0");
        if (cfg.horizon && !(*cfg.horizon > 0.0)) throw ConfigError("config: horizon must be > 0");
        return cfg;
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
    }
}

[[nodiscard]] inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

[[nodiscard]] inline json to_json(const RunConfig& cfg) {
    json j;
    j["network"] = {{"E", cfg.network.E()}, {"g_l", cfg.network.g_l()}};
    j["loads"] = json::array();
    for (const auto& l : cfg.loads.loads()) {
        json jl = {{"P0", l.p0}, {"flexible", l.flexible}};
        if (l.flexible) jl["kappa"] = l.kappa;
        j["loads"].push_back(jl);
    }
    if (cfg.controller) j["controller"] = {{"a", cfg.controller->a()}, {"b", cfg.controller->b()}};
    if (cfg.scenario) {
        const auto& sc = *cfg.scenario;
        json js = {{"horizon", sc.horizon}, {"dt", sc.dt}, {"record_every", sc.record_every}};
        if (sc.ramp) {
            js["ramp"] = {{"from", sc.ramp->from}, {"to", sc.ramp->to}, {"t_start", sc.ramp->t_start},
                          {"t_end", sc.ramp->t_end}};
        }
        if (sc.schedule) {
            js["schedule"] = json::array();
            for (std::size_t k = 0; k < sc.schedule->times.size(); ++k) {
                js["schedule"].push_back({{"t", sc.schedule->times[k]}, {"P0", sc.schedule->demands[k]}});
            }
        }
        if (sc.initial) js["initial"] = detail::state_json(*sc.initial);
        j["scenario"] = js;
    }
    if (cfg.sweep) j["sweep"] = {{"p0n", *cfg.sweep}};
    if (cfg.point) {
        json jp = json::object();
        if (cfg.point->branch) jp["branch"] = to_string(*cfg.point->branch);
        if (cfg.point->state) jp["state"] = detail::state_json(*cfg.point->state);
        j["point"] = jp;
    }
    if (cfg.out) j["out"] = *cfg.out;
    if (cfg.dt) j["dt"] = *cfg.dt;
    if (cfg.horizon) j["horizon"] = *cfg.horizon;
    return j;
}

/// The ramp scenario the config describes, with dt / horizon overrides applied.
[[nodiscard]] inline RampScenario build_scenario(const RunConfig& cfg) {
    ScenarioConfig sc = cfg.scenario.value_or(ScenarioConfig{});
    if (!sc.ramp && !sc.schedule) sc.ramp = RampSpec{};
    RampScenario out{DemandSchedule::constant(cfg.loads.demands()), cfg.horizon.value_or(sc.horizon),
                     cfg.dt.value_or(sc.dt), sc.initial, sc.record_every};
    if (sc.ramp) {
        out.schedule = linear_ramp(cfg.network, cfg.loads, sc.ramp->from, sc.ramp->to, sc.ramp->t_start,
                                   sc.ramp->t_end);
    } else {
        out.schedule = DemandSchedule(sc.schedule->times, sc.schedule->demands);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Formatting

/// Scientific notation with 17 significant digits.
[[nodiscard]] inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
        out_ << '\n';
    }
    CsvWriter& cell(double x) { return raw(format_number(x)); }
    CsvWriter& cell(const std::string& s) { return raw(s); }
    CsvWriter& cell(bool b) { return raw(b ? "1" : "0"); }
    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    std::ostream& out_;
    bool first_ = true;
};

namespace detail {

inline json complex_list(const std::vector<Complex>& zs) {
    json a = json::array();
    for (auto z : zs) a.push_back({z.real(), z.imag()});
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct CommandResult {
    int exit_code = kOk;
    std::string output;   // CSV or JSON document
    std::string message;  // for stderr
};

[[nodiscard]] inline CommandResult cmd_equilibria(const RunConfig& cfg) {
    const auto p0 = cfg.loads.demands();
    const bool controlled = cfg.controller && cfg.loads.n_flexible() > 0;
    const auto pts = all_equilibria(cfg.network, cfg.loads, p0, cfg.controller);

    json report;
    report["p_max"] = p_max(cfg.network);
    report["total_demand"] = cfg.loads.total_demand();
    report["controlled"] = controlled;
    report["points"] = json::array();
    for (const auto& pt : pts) {
        json jp;
        jp["class"] = to_string(pt.cls);
        jp["exists"] = pt.exists;
        jp["g"] = pt.g_star;
        jp["phi"] = pt.phi_star;
        jp["ghat"] = pt.ghat_star;
        jp["gN"] = pt.gN_star;
        jp["v"] = pt.v_star;
        jp["residual"] = equilibrium_residual(pt, cfg.network, cfg.loads, p0, controlled ? cfg.controller : std::nullopt);
        jp["verdict"] = pt.exists ? json(to_string(classify(pt, cfg.network, cfg.loads, controlled ? cfg.controller
                                                                                                     : std::nullopt)))
                                  : json(nullptr);
        report["points"].push_back(jp);
    }
    CommandResult res;
    if (pts.empty()) {
        res.exit_code = kNoEquilibrium;
        res.message = "no equilibrium: total demand " + std::to_string(cfg.loads.total_demand()) +
                      " exceeds network capacity P_max = " + std::to_string(p_max(cfg.network)) + " (overload)";
        report["message"] = res.message;
    }
    res.output = report.dump(2) + "\n";
    return res;
}

[[nodiscard]] inline CommandResult cmd_simulate(const RunConfig& cfg) {
    if (cfg.sweep || cfg.point) throw ConfigError("simulate: config carries a sweep/point section, expected a scenario");
    const auto sc = build_scenario(cfg);
    RampResult run;
    CommandResult res;
    try {
        run = run_ramp(cfg.network, cfg.loads, cfg.controller, sc);
    } catch (const IntegrationError& e) {
        run.trajectory = e.partial;
        res.message = e.what();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto& T = run.trajectory;
    const std::size_t n = cfg.loads.size();
    const std::size_t nF = run.layout.controlled ? run.layout.n_flexible : 0;

    std::ostringstream out;
    CsvWriter csv(out);
    std::vector<std::string> cols{"t"};
    for (std::size_t i = 1; i <= n; ++i) cols.push_back("g_" + std::to_string(i));
    cols.push_back("phi");
    for (std::size_t k = 1; k <= nF; ++k) cols.push_back("ghat_" + std::to_string(k));
    cols.push_back("v");
    for (std::size_t i = 1; i <= n; ++i) cols.push_back("P_" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) cols.push_back("P0_" + std::to_string(i));
    cols.push_back("collapsed");
    csv.header(cols);
    for (std::size_t k = 0; k < T.size(); ++k) {
        const auto& s = T.states[k];
        csv.cell(T.times[k]);
        for (double g : s.g) csv.cell(g);
        csv.cell(s.phi);
        for (std::size_t q = 0; q < nF; ++q) csv.cell(s.ghat[q]);
        csv.cell(T.v[k]);
        for (double p : T.power[k]) csv.cell(p);
        for (double p : T.demand[k]) csv.cell(p);
        csv.cell(detect_collapse(s, cfg.network));
        csv.end_row();
    }
    res.output = out.str();
    for (const auto& w : T.warnings) res.message += (res.message.empty() ? "" : "\n") + std::string("warning: ") + w;
    if (T.collapsed()) {
        res.exit_code = kCollapse;
        res.message += (res.message.empty() ? "" : "\n") + std::string("voltage collapse at t = ") +
                       format_number(T.times.back());
    } else if (!res.message.empty() && res.message.rfind("integrate:", 0) == 0) {
        res.exit_code = kCollapse;
    }
    return res;
}

[[nodiscard]] inline CommandResult cmd_sweep(const RunConfig& cfg) {
    if (!cfg.sweep) throw ConfigError("sweep: config has no \"sweep\" section");
    const auto result = bifurcation_sweep(cfg.network, cfg.loads, cfg.controller, *cfg.sweep);
    std::ostringstream out;
    CsvWriter csv(out);
    csv.header({"p0n", "branch", "gN", "v", "stable", "exists"});
    for (const auto& r : result.rows) {
        csv.cell(r.p0n).cell(std::string(to_string(r.branch))).cell(r.gN).cell(r.v);
        csv.cell(std::string(r.verdict ? to_string(*r.verdict) : "none")).cell(r.exists);
        csv.end_row();
    }
    return {kOk, out.str(), {}};
}

[[nodiscard]] inline json spectrum_json(const SpectrumReport& r) {
    json j;
    j["v"] = r.v;
    j["gN"] = r.gN;
    j["gI"] = r.gI;
    j["c"] = r.c;
    j["lambda_tilde"] = r.lambda_tilde;
    j["quad_pair_roots"] = detail::complex_list({r.quad_pair_roots[0], r.quad_pair_roots[1]});
    j["quad_multiplicity"] = r.quad_multiplicity;
    j["minus_v2"] = r.minus_v2;
    j["minus_v2_multiplicity"] = r.minus_v2_multiplicity;
    if (r.quartic) {
        j["quartic"] = {{"a3", r.quartic->a3}, {"a2", r.quartic->a2}, {"a1", r.quartic->a1}, {"a0", r.quartic->a0}};
        j["quartic_roots"] = detail::complex_list(r.quartic_roots);
        j["quartic_root_dropped"] = r.quartic_root_dropped;
    }
    if (r.routh) {
        j["routh"] = {{"column", r.routh->entries},
                      {"sign_changes", r.routh->sign_changes},
                      {"degenerate", r.routh->degenerate}};
        j["routh_limit_a0"] = {{"b1", r.routh_b1_limit_a0}, {"c1", r.routh_c1_limit_a0}};
    }
    j["degenerate_a"] = r.degenerate_a;
    j["degenerate_a_value"] = r.degenerate_a_value;
    j["closed_form_eigenvalues"] = detail::complex_list(r.closed_form_eigenvalues);
    j["oracle_eigenvalues"] = detail::complex_list(r.oracle_eigenvalues);
    j["max_match_error"] = r.max_match_error;
    return j;
}

[[nodiscard]] inline json inflexible_spectrum_json(const NetworkParams& net, std::span<const double> g) {
    const double gN = total_conductance(g);
    const double v = voltage(net, gN);
    std::vector<double> w(g.begin(), g.end());
    for (auto& x : w) x *= 2.0 * v * v / (gN + net.g_l());
    std::vector<Complex> cf;
    for (const auto& p : rpsi_spectrum(w, -v * v)) cf.push_back(p.value);
    sort_spectrum(cf);
    auto oracle = numeric_eigenvalues(jacobian_inflexible(net, g));
    sort_spectrum(oracle);
    json j;
    j["v"] = v;
    j["gN"] = gN;
    j["lambda_n"] = 2.0 * v * v * gN / (gN + net.g_l()) - v * v;
    j["closed_form_eigenvalues"] = detail::complex_list(cf);
    j["oracle_eigenvalues"] = detail::complex_list(oracle);
    j["max_match_error"] = spectrum_match_error(cf, oracle);
    return j;
}

[[nodiscard]] inline CommandResult cmd_stability(const RunConfig& cfg) {
    const auto p0 = cfg.loads.demands();
    const bool controlled = cfg.controller && cfg.loads.n_flexible() > 0;
    const auto ctrl = controlled ? cfg.controller : std::nullopt;

    struct Target {
        std::string label;
        VcsState state;
        std::optional<EquilibriumPoint> point;
    };
    std::vector<Target> targets;
    if (cfg.point && cfg.point->state) {
        VcsState s = *cfg.point->state;
        if (s.g.size() != cfg.loads.size()) throw ConfigError("point.state.g must list one conductance per load");
        if (controlled && s.ghat.size() != cfg.loads.n_flexible()) {
            throw ConfigError("point.state.ghat must list one entry per flexible load");
        }
        targets.push_back({"custom", std::move(s), std::nullopt});
    } else {
        for (const auto& pt : all_equilibria(cfg.network, cfg.loads, p0, ctrl)) {
            if (cfg.point && cfg.point->branch && *cfg.point->branch != pt.cls) continue;
            targets.push_back({to_string(pt.cls), pt.state(), pt});
        }
    }

    json report;
    report["controlled"] = controlled;
    report["points"] = json::array();
    for (const auto& t : targets) {
        json jp;
        jp["class"] = t.label;
        jp["state"] = detail::state_json(t.state);
        if (t.point) {
            jp["exists"] = t.point->exists;
            jp["verdict"] = to_string(classify(*t.point, cfg.network, cfg.loads, p0, ctrl));
        }
        if (controlled) {
            const auto rep = vcs_closed_form_spectrum(cfg.network, cfg.loads, t.state, *ctrl, p0);
            jp["spectrum"] = spectrum_json(rep);
            if (!t.point && rep.routh) jp["verdict"] = to_string(verdict_from_routh(*rep.routh));
        } else {
            jp["spectrum"] = inflexible_spectrum_json(cfg.network, t.state.g);
            if (!t.point) {
                const double gap = total_conductance(t.state.g) - cfg.network.g_l();
                jp["verdict"] = std::abs(gap) < kBoundaryRelTolerance * cfg.network.g_l() ? "marginal"
                                : gap < 0.0                                               ? "stable"
                                                                                          : "unstable";
            }
        }
        report["points"].push_back(jp);
    }
    CommandResult res;
    if (targets.empty()) {
        res.exit_code = kNoEquilibrium;
        res.message = cfg.point && cfg.point->branch
                          ? std::string("no equilibrium on branch ") + to_string(*cfg.point->branch)
                          : "no equilibrium: total demand exceeds network capacity (overload)";
        report["message"] = res.message;
    }
    res.output = report.dump(2) + "\n";
    return res;
}

/// Dispatches a subcommand by name.
[[nodiscard]] inline CommandResult run_command(const std::string& name, const RunConfig& cfg) {
    if (name == "equilibria") return cmd_equilibria(cfg);
    if (name == "simulate") return cmd_simulate(cfg);
    if (name == "sweep") return cmd_sweep(cfg);
    if (name == "stability") return cmd_stability(cfg);
    throw ConfigError("unknown command " + name);
}

/// Writes `content` to `path` via a temporary file and a rename.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << content;
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace vcstab::cli
