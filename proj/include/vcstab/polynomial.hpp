#pragma once

// Roots of small monic real polynomials by simultaneous (Aberth-Ehrlich)
// iteration. Used for the closed-form quadratic/quartic eigenvalue groups,
// independent of any matrix eigensolver.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace vcstab {

using Complex = std::complex<double>;

/// Roots of lambda^2 + p lambda + q.
[[nodiscard]] inline std::vector<Complex> quadratic_roots(double p, double q) {
    const double disc = p * p - 4.0 * q;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        // larger-magnitude root first, the other from the product
        const double r1 = (p >= 0.0) ? -0.5 * (p + s) : -0.5 * (p - s);
        if (r1 == 0.0) return {Complex(0.0), Complex(-p)};
        return {Complex(r1), Complex(q / r1)};
    }
    const double re = -0.5 * p;
    const double im = 0.5 * std::sqrt(-disc);
    return {Complex(re, im), Complex(re, -im)};
}

/// Roots of x^n + c[n-1] x^(n-1) + ... + c[0]; `c` holds c[0]..c[n-1].
[[nodiscard]] inline std::vector<Complex> monic_roots(std::span<const double> c) {
    const std::size_t n = c.size();
    if (n == 0) return {};
    if (n == 1) return {Complex(-c[0])};
    if (n == 2) return quadratic_roots(c[1], c[0]);

    auto eval = [&](Complex z, Complex& dp) {
        Complex p(1.0);
        dp = Complex(0.0);
        for (std::size_t k = n; k-- > 0;) {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        return p;
    };

    // Fujiwara bound for the initial circle
    double radius = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double term = std::pow(std::abs(c[k]) / (k == 0 ? 2.0 : 1.0), 1.0 / static_cast<double>(n - k));
        radius = std::max(radius, term);
    }
    radius = 2.0 * std::max(radius, 1e-3);

    std::vector<Complex> z(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n) + 0.4;
        z[k] = std::polar(radius * 0.5, theta);
    }

    for (int iter = 0; iter < 500; ++iter) {
        double max_step = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            Complex dp;
            const Complex p = eval(z[k], dp);
            if (p == Complex(0.0)) continue;
            const Complex ratio = p / dp;
            Complex repulsion(0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != k) repulsion += 1.0 / (z[k] - z[j]);
            }
            const Complex step = ratio / (1.0 - ratio * repulsion);
            z[k] -= step;
            max_step = std::max(max_step, std::abs(step) / std::max(1.0, std::abs(z[k])));
        }
        if (max_step < 1e-16) break;
    }

    // Newton polish on each root
    for (auto& r : z) {
        for (int it = 0; it < 3; ++it) {
            Complex dp;
            const Complex p = eval(r, dp);
            if (dp == Complex(0.0)) break;
            const Complex next = r - p / dp;
            Complex dq;
            if (std::abs(eval(next, dq)) < std::abs(p)) r = next; else break;
        }
    }
    // snap conjugate-pair noise on real roots
    for (auto& r : z) {
        if (std::abs(r.imag()) <= 1e-14 * std::max(1.0, std::abs(r.real()))) r = Complex(r.real(), 0.0);
    }
    return z;
}

}  // namespace vcstab
