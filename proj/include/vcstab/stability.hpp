#pragma once

// Linearisation of both systems: Jacobian assembly, the closed-form spectra
// (rank-1-plus-scaled-identity structure and the closed-loop quartic),
// Routh-Hurwitz first column, stability verdicts and the shed band (m_b, M_b).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcstab/dynamics.hpp"
#include "vcstab/equilibria.hpp"
#include "vcstab/network.hpp"
#include "vcstab/polynomial.hpp"

namespace vcstab {

// ---------------------------------------------------------------------------
// Scalar building blocks

/// v^2 (g_l - gN) / (g_l + gN): the nontrivial eigenvalue of the
/// uncontrolled Jacobian with its sign flipped.
[[nodiscard]] inline double tilde_lambda(const NetworkParams& net, double gN) {
    require_nonnegative(gN, "tilde_lambda");
    const double v = voltage(net, gN);
    return v * v * (net.g_l() - gN) / (net.g_l() + gN);
}

/// Derivative of phi_dot with respect to any g_j:
/// (dP/dgN)^2 + (P(gN) - p0n) d^2P/dgN^2.
[[nodiscard]] inline double mismatch_curvature_c(const NetworkParams& net, double p0n, double gN) {
    require_nonnegative(gN, "mismatch_curvature_c");
    if (!(p0n >= 0.0)) throw std::domain_error("mismatch_curvature_c: total demand must be >= 0");
    const double gl = net.g_l();
    const double v = voltage(net, gN);
    const double v2 = v * v;
    const double d = gN + gl;
    const double slope = v2 * (gl - gN) / d;
    const double mismatch = total_power(net, gN) - p0n;
    return slope * slope + mismatch * 2.0 * v2 * (gN - 2.0 * gl) / (d * d);
}

// ---------------------------------------------------------------------------
// Rank-1 plus scaled identity

struct EigenPair {
    Complex value;
    Eigen::VectorXd vector;
};

/// Eigenpairs of w 1^T + q I: q on e_1 - e_i (i = 2..n) and sum(w) + q on w.
[[nodiscard]] inline std::vector<EigenPair> rpsi_spectrum(std::span<const double> w, double q) {
    const auto n = static_cast<Eigen::Index>(w.size());
    if (n == 0) throw std::invalid_argument("rpsi_spectrum: empty vector");
    std::vector<EigenPair> out;
    for (Eigen::Index i = 1; i < n; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        x(0) = 1.0;
        x(i) = -1.0;
        out.push_back({Complex(q), std::move(x)});
    }
    Eigen::VectorXd wv(n);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        wv(i) = w[static_cast<std::size_t>(i)];
        sum += wv(i);
    }
    if (wv.squaredNorm() == 0.0) {
        // any vector works; e_1 completes the basis
        wv = Eigen::VectorXd::Unit(n, 0);
    }
    out.push_back({Complex(sum + q), std::move(wv)});
    return out;
}

// ---------------------------------------------------------------------------
// Jacobians

/// J = (2 v^2 / (gN + g_l)) g 1^T - v^2 I of the uncontrolled system.
/// Pass `p0` to get a warning when g is not an equilibrium.
[[nodiscard]] inline Eigen::MatrixXd jacobian_inflexible(const NetworkParams& net, std::span<const double> g,
                                                         std::span<const double> p0 = {},
                                                         std::vector<std::string>* warnings = nullptr) {
    const auto n = static_cast<Eigen::Index>(g.size());
    const double gN = total_conductance(g);
    const double v = voltage(net, gN);
    const double v2 = v * v;
    const double scale = 2.0 * v2 / (gN + net.g_l());
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) J(i, j) = scale * g[static_cast<std::size_t>(i)];
        J(i, i) -= v2;
    }
    if (!p0.empty()) {
        if (p0.size() != g.size()) throw ShapeError("jacobian_inflexible: demand vector length mismatch");
        double r = 0.0;
        for (double q : inflexible_rhs(net, p0, g)) r = std::max(r, std::abs(q));
        if (r > 1e-6 && warnings) {
            warnings->push_back("jacobian_inflexible: state is not an equilibrium (residual " + std::to_string(r) +
                                ")");
        }
    }
    return J;
}

/// Closed-loop Jacobian in the packed order [g (n), phi, ghat (n_F)].
[[nodiscard]] inline Eigen::MatrixXd jacobian_vcs(const NetworkParams& net, const LoadSet& loads,
                                                  const VcsState& s, const ControllerParams& ctrl,
                                                  std::span<const double> p0) {
    check_state_shape(loads, s, "jacobian_vcs");
    if (p0.size() != loads.size()) throw ShapeError("jacobian_vcs: demand vector length mismatch");
    const auto n = static_cast<Eigen::Index>(loads.size());
    const auto nF = static_cast<Eigen::Index>(loads.n_flexible());
    const Eigen::Index dim = n + 1 + nF;
    const Eigen::Index phi = n;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    M.topLeftCorner(n, n) = jacobian_inflexible(net, s.g);

    double demand = 0.0;
    for (double p : p0) demand += p;
    const double c = mismatch_curvature_c(net, demand, total_conductance(s.g));
    for (Eigen::Index j = 0; j < n; ++j) M(phi, j) = c;

    const auto& F = loads.flexible();
    for (Eigen::Index k = 0; k < nF; ++k) {
        const auto i = static_cast<Eigen::Index>(F[static_cast<std::size_t>(k)]);
        M(i, i) -= ctrl.b();
        M(i, phi) = -loads[static_cast<std::size_t>(i)].kappa;
        M(i, n + 1 + k) = ctrl.b();
        M(n + 1 + k, i) = ctrl.a();
        M(n + 1 + k, n + 1 + k) = -ctrl.a();
    }
    return M;
}

[[nodiscard]] inline Eigen::MatrixXd jacobian_vcs(const NetworkParams& net, const LoadSet& loads,
                                                  const VcsState& s, const ControllerParams& ctrl) {
    const auto p0 = loads.demands();
    return jacobian_vcs(net, loads, s, ctrl, std::span<const double>(p0));
}

// ---------------------------------------------------------------------------
// Quartic and Routh-Hurwitz

/// lambda^4 + a3 lambda^3 + a2 lambda^2 + a1 lambda + a0.
struct QuarticCoeffs {
    double a3 = 0.0;
    double a2 = 0.0;
    double a1 = 0.0;
    double a0 = 0.0;
};

/// Quartic coefficients from aggregate quantities; `gI` is the total
/// inflexible conductance and p0n the total demand.
[[nodiscard]] inline QuarticCoeffs vcs_quartic(const NetworkParams& net, double kappa_bar,
                                               const ControllerParams& ctrl, double gN, double gI, double p0n) {
    const double v = voltage(net, gN);
    const double v2 = v * v;
    const double lt = tilde_lambda(net, gN);
    const double c = mismatch_curvature_c(net, p0n, gN);
    const double a = ctrl.a();
    const double b = ctrl.b();
    QuarticCoeffs q;
    q.a0 = kappa_bar * a * c * v2;
    q.a1 = a * v2 * lt + kappa_bar * c * (a + v2);
    q.a2 = kappa_bar * c + v2 * (a + b) - 2.0 * b * v2 * gI / (gN + net.g_l()) + lt * (a + v2);
    q.a3 = b + a + v2 + lt;
    return q;
}

/// Same, with the inflexible conductances recovered as P_0,i / v^2 at gN.
[[nodiscard]] inline QuarticCoeffs vcs_quartic(const NetworkParams& net, const LoadSet& loads,
                                               const ControllerParams& ctrl, double gN, double p0n) {
    if (loads.n_flexible() == 0) throw UnsupportedConfiguration("vcs_quartic: needs at least one flexible load");
    const double v = voltage(net, gN);
    double gI = 0.0;
    for (std::size_t i : loads.inflexible()) gI += loads[i].p0 / (v * v);
    return vcs_quartic(net, loads.kappa_bar(), ctrl, gN, gI, p0n);
}

inline constexpr double kRouthZeroTolerance = 1e-12;

struct RouthColumn {
    std::array<double, 5> entries{};  // 1, alpha3, b1, c1, d1
    int sign_changes = 0;
    bool degenerate = false;
};

[[nodiscard]] inline RouthColumn routh_first_column(const QuarticCoeffs& q) {
    RouthColumn r;
    auto& e = r.entries;
    e[0] = 1.0;
    e[1] = q.a3;
    e[4] = q.a0;  // d1 = b2 = alpha0 whenever the table exists
    bool ok = std::abs(q.a3) >= kRouthZeroTolerance;
    if (ok) {
        e[2] = (q.a3 * q.a2 - q.a1) / q.a3;
        ok = std::abs(e[2]) >= kRouthZeroTolerance;
        if (ok) e[3] = (e[2] * q.a1 - q.a3 * q.a0) / e[2];
    }
    r.degenerate = !ok;
    for (double x : e) {
        if (std::abs(x) < kRouthZeroTolerance) r.degenerate = true;
    }
    double prev = e[0];
    for (std::size_t k = 1; k < e.size(); ++k) {
        if (std::abs(e[k]) < kRouthZeroTolerance) continue;
        if ((e[k] > 0.0) != (prev > 0.0)) ++r.sign_changes;
        prev = e[k];
    }
    return r;
}

[[nodiscard]] inline std::vector<Complex> quartic_roots(const QuarticCoeffs& q) {
    const std::array<double, 4> c{q.a0, q.a1, q.a2, q.a3};
    return monic_roots(c);
}

// ---------------------------------------------------------------------------
// Spectra

/// Dense general eigensolver on a real matrix (the numeric oracle).
[[nodiscard]] inline std::vector<Complex> numeric_eigenvalues(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("numeric_eigenvalues: eigensolver did not converge");
    const auto& ev = es.eigenvalues();
    std::vector<Complex> out(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) out[static_cast<std::size_t>(i)] = ev(i);
    return out;
}

/// Largest distance in a greedy nearest-pair matching of two multisets.
[[nodiscard]] inline double spectrum_match_error(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    struct Pair {
        double d;
        std::size_t i, j;
    };
    std::vector<Pair> pairs;
    pairs.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) pairs.push_back({std::abs(a[i] - b[j]), i, j});
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.d < y.d; });
    std::vector<bool> used_a(a.size()), used_b(b.size());
    double worst = 0.0;
    std::size_t matched = 0;
    for (const auto& p : pairs) {
        if (used_a[p.i] || used_b[p.j]) continue;
        used_a[p.i] = used_b[p.j] = true;
        worst = std::max(worst, p.d);
        if (++matched == a.size()) break;
    }
    return worst;
}

/// Sort by real part, then imaginary part.
inline void sort_spectrum(std::vector<Complex>& s) {
    std::sort(s.begin(), s.end(), [](Complex x, Complex y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
}

struct SpectrumReport {
    double v = 0.0;
    double gN = 0.0;
    double gI = 0.0;
    double c = 0.0;
    double lambda_tilde = 0.0;

    std::array<Complex, 2> quad_pair_roots{};  // lambda^2 + (a + b + v^2) lambda + a v^2
    std::size_t quad_multiplicity = 0;         // n_F - 1 each
    double minus_v2 = 0.0;
    std::size_t minus_v2_multiplicity = 0;  // n_I - 1

    std::optional<QuarticCoeffs> quartic;  // absent when n_F = 0
    std::vector<Complex> quartic_roots;
    bool quartic_root_dropped = false;  // n_I = 0: one copy of -v^2 in the quartic is not an eigenvalue
    std::optional<RouthColumn> routh;
    double routh_b1_limit_a0 = 0.0;  // b1 and c1 as a -> 0+
    double routh_c1_limit_a0 = 0.0;

    bool degenerate_a = false;        // a == v^2 - 2 v^2 gI / (gN + g_l): -a is an eigenvalue
    double degenerate_a_value = 0.0;  // the right-hand side of that condition

    std::vector<Complex> closed_form_eigenvalues;
    std::vector<Complex> oracle_eigenvalues;
    double max_match_error = 0.0;
};

inline constexpr double kDegenerateARelTolerance = 1e-10;

/// Closed-form spectrum of the closed-loop Jacobian at any state, with the
/// dense eigensolver result and the match error alongside.
[[nodiscard]] inline SpectrumReport vcs_closed_form_spectrum(const NetworkParams& net, const LoadSet& loads,
                                                             const VcsState& s, const ControllerParams& ctrl,
                                                             std::span<const double> p0) {
    check_state_shape(loads, s, "vcs_closed_form_spectrum");
    SpectrumReport r;
    const std::size_t nF = loads.n_flexible();
    const std::size_t nI = loads.n_inflexible();
    r.gN = total_conductance(s.g);
    for (std::size_t i : loads.inflexible()) r.gI += s.g[i];
    r.v = voltage(net, r.gN);
    const double v2 = r.v * r.v;
    double demand = 0.0;
    for (double p : p0) demand += p;
    r.c = mismatch_curvature_c(net, demand, r.gN);
    r.lambda_tilde = tilde_lambda(net, r.gN);
    r.minus_v2 = -v2;
    r.degenerate_a_value = v2 - 2.0 * v2 * r.gI / (r.gN + net.g_l());
    r.degenerate_a = nF > 0 && nI > 0 &&
                     std::abs(ctrl.a() - r.degenerate_a_value) <=
                         kDegenerateARelTolerance * std::max(ctrl.a(), v2);

    auto& cf = r.closed_form_eigenvalues;
    if (nF == 0) {
        // uncontrolled Jacobian bordered by a zero phi column
        std::vector<double> w(s.g);
        for (auto& x : w) x *= 2.0 * v2 / (r.gN + net.g_l());
        for (const auto& pair : rpsi_spectrum(w, -v2)) cf.push_back(pair.value);
        cf.emplace_back(0.0);
        r.minus_v2_multiplicity = nI - 1;
    } else {
        const auto qp = quadratic_roots(ctrl.a() + ctrl.b() + v2, ctrl.a() * v2);
        r.quad_pair_roots = {qp[0], qp[1]};
        r.quad_multiplicity = nF - 1;
        for (std::size_t k = 0; k + 1 < nF; ++k) cf.insert(cf.end(), qp.begin(), qp.end());
        r.minus_v2_multiplicity = nI > 0 ? nI - 1 : 0;
        for (std::size_t k = 0; k < r.minus_v2_multiplicity; ++k) cf.emplace_back(-v2);

        r.quartic = vcs_quartic(net, loads.kappa_bar(), ctrl, r.gN, r.gI, demand);
        r.quartic_roots = quartic_roots(*r.quartic);
        auto kept = r.quartic_roots;
        if (nI == 0) {
            auto it = std::min_element(kept.begin(), kept.end(), [v2](Complex x, Complex y) {
                return std::abs(x + v2) < std::abs(y + v2);
            });
            kept.erase(it);
            r.quartic_root_dropped = true;
        }
        cf.insert(cf.end(), kept.begin(), kept.end());

        r.routh = routh_first_column(*r.quartic);
        const ControllerParams limit_ctrl(std::numeric_limits<double>::min(), ctrl.b());
        const auto q0 = vcs_quartic(net, loads.kappa_bar(), limit_ctrl, r.gN, r.gI, demand);
        r.routh_b1_limit_a0 = q0.a3 != 0.0 ? q0.a2 - q0.a1 / q0.a3 : std::numeric_limits<double>::quiet_NaN();
        r.routh_c1_limit_a0 = q0.a1;
    }
    sort_spectrum(cf);

    r.oracle_eigenvalues = numeric_eigenvalues(jacobian_vcs(net, loads, s, ctrl, p0));
    sort_spectrum(r.oracle_eigenvalues);
    r.max_match_error = spectrum_match_error(cf, r.oracle_eigenvalues);
    return r;
}

[[nodiscard]] inline SpectrumReport vcs_closed_form_spectrum(const NetworkParams& net, const LoadSet& loads,
                                                             const VcsState& s, const ControllerParams& ctrl) {
    const auto p0 = loads.demands();
    return vcs_closed_form_spectrum(net, loads, s, ctrl, std::span<const double>(p0));
}

// ---------------------------------------------------------------------------
// Verdicts

enum class Verdict { stable, unstable, marginal, degenerate };

[[nodiscard]] inline const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::stable: return "stable";
        case Verdict::unstable: return "unstable";
        case Verdict::marginal: return "marginal";
        case Verdict::degenerate: return "degenerate";
    }
    return "?";
}

inline constexpr double kBoundaryRelTolerance = 1e-10;

[[nodiscard]] inline Verdict verdict_from_routh(const RouthColumn& rc) {
    const double d1 = rc.entries[4];
    if (d1 <= -kRouthZeroTolerance) return Verdict::unstable;  // product of the roots is negative
    if (std::abs(d1) < kRouthZeroTolerance) return Verdict::marginal;
    if (rc.degenerate) return Verdict::degenerate;
    return rc.sign_changes == 0 ? Verdict::stable : Verdict::unstable;
}

/// Local stability of an equilibrium. Without a controller the verdict comes
/// from the sign of gN* - g_l; with one it is the Routh-Hurwitz verdict on the
/// quartic (the other eigenvalue groups lie in the open left half plane).
[[nodiscard]] inline Verdict classify(const EquilibriumPoint& pt, const NetworkParams& net, const LoadSet& loads,
                                      std::span<const double> p0, const std::optional<ControllerParams>& ctrl) {
    const double gap = pt.gN_star - net.g_l();
    const bool at_boundary = std::abs(gap) < kBoundaryRelTolerance * net.g_l();
    if (!ctrl || loads.n_flexible() == 0) {
        if (at_boundary) return Verdict::marginal;
        return gap < 0.0 ? Verdict::stable : Verdict::unstable;
    }
    if (at_boundary && pt.cls != EquilibriumClass::Ep) return Verdict::marginal;
    const double v = voltage(net, pt.gN_star);
    if (!(v > 0.0)) return Verdict::degenerate;
    double gI = 0.0;
    for (std::size_t i : loads.inflexible()) gI += pt.g_star[i];
    double demand = 0.0;
    for (double p : p0) demand += p;
    const auto q = vcs_quartic(net, loads.kappa_bar(), *ctrl, pt.gN_star, gI, demand);
    return verdict_from_routh(routh_first_column(q));
}

[[nodiscard]] inline Verdict classify(const EquilibriumPoint& pt, const NetworkParams& net, const LoadSet& loads,
                                      const std::optional<ControllerParams>& ctrl) {
    const auto p0 = loads.demands();
    return classify(pt, net, loads, std::span<const double>(p0), ctrl);
}

// ---------------------------------------------------------------------------
// Shed band

struct ShedBand {
    double m_b = 0.0;  // tilde_lambda(g_l + m_b) + b = 0 with g_l + m_b in (g_l, 2 g_l)
    double M_b = 0.0;  // tilde_lambda(g_l + M_b) + b = 0 with g_l + M_b > 2 g_l
};

namespace detail {

template <class F>
double bisect(F&& f, double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

}  // namespace detail

[[nodiscard]] inline ShedBand shed_band(const NetworkParams& net, double b) {
    const double limit = net.E() * net.E() / 27.0;
    if (!(b > 0.0 && b < limit)) {
        throw std::domain_error("shed_band: b must lie in (0, E^2/27) = (0, " + std::to_string(limit) + "), got " +
                                std::to_string(b));
    }
    const double gl = net.g_l();
    auto h = [&](double gN) { return tilde_lambda(net, gN) + b; };
    const double xi = detail::bisect(h, gl, 2.0 * gl);
    double upper = 4.0 * gl;
    while (h(upper) < 0.0) upper *= 2.0;
    const double Xi = detail::bisect(h, 2.0 * gl, upper);
    return {xi - gl, Xi - gl};
}

}  // namespace vcstab
