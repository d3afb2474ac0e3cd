#pragma once

// Gamma-function helpers and the geometric constants of the unit ball.

#include <array>
#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace mcfpinn {

namespace detail {

// Lanczos coefficients for g = 7, n = 9.
inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

inline double log_gamma_lanczos(double z) {
    z -= 1.0;
    double sum = kLanczosCoef[0];
    for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) sum += kLanczosCoef[i] / (z + static_cast<double>(i));
    const double t = z + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

}  // namespace detail

/// ln Gamma(z) for z > 0. Arguments below 1/2 go through the reflection formula.
inline double log_gamma(double z) {
    if (!(z > 0.0) || !std::isfinite(z)) throw InvalidParameter("log_gamma: argument must be positive and finite");
    if (z < 0.5) {
        const double pi = std::numbers::pi;
        return std::log(pi / std::sin(pi * z)) - detail::log_gamma_lanczos(1.0 - z);
    }
    return detail::log_gamma_lanczos(z);
}

inline void check_order(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidParameter("fractional order alpha must lie in (0, 2)");
}

inline void check_dimension(int d) {
    if (d < 1) throw InvalidParameter("dimension must be at least 1");
}

/// Normalizing constant C(d, alpha) of the singular-integral fractional Laplacian.
///
/// |Gamma(-alpha/2)| is replaced by pi / (sin(pi alpha/2) Gamma(1 + alpha/2)) so that
/// no Gamma evaluation at a negative argument is needed.
inline double fractional_constant(int d, double alpha) {
    check_dimension(d);
    check_order(alpha);
    const double pi = std::numbers::pi;
    const double half = 0.5 * alpha;
    const double log_abs_gamma_neg = std::log(pi) - std::log(std::sin(pi * half)) - log_gamma(1.0 + half);
    return std::exp(alpha * std::log(2.0) + log_gamma(0.5 * (alpha + d)) - 0.5 * d * std::log(pi) -
                    log_abs_gamma_neg);
}

/// Surface area of the unit sphere S^{d-1}.
inline double sphere_area(int d) {
    check_dimension(d);
    const double pi = std::numbers::pi;
    return 2.0 * std::exp(0.5 * d * std::log(pi) - log_gamma(0.5 * d));
}

/// Volume of the unit ball in R^d.
inline double ball_volume(int d) {
    check_dimension(d);
    return sphere_area(d) / static_cast<double>(d);
}

}  // namespace mcfpinn
