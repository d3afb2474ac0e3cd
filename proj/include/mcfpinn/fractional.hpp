#pragma once

// Monte Carlo estimation of the fractional Laplacian
//
//   (-Delta)^{alpha/2} u(x) = C(d, alpha) P.V. int (u(x) - u(y)) / |x - y|^{d + alpha} dy.
//
// The integral is split at |x - y| = r0. Inside, the radius is drawn with density
// proportional to r^{1-alpha} on [0, r0] and clamped below at eps; outside, with
// density alpha r0^alpha r^{-1-alpha} on [r0, inf). Both pieces are expressed through
// the symmetric second difference 2u(x) - u(x - r xi) - u(x + r xi).

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "sampling.hpp"
#include "special.hpp"

namespace mcfpinn {

/// Anything that evaluates a real number at a point of R^d.
template <class F>
concept ScalarField = requires(const F& f, std::span<const double> x) {
    { f(x) } -> std::convertible_to<double>;
};

/// Type-erased scalar field.
using FieldFn = std::function<double(std::span<const double>)>;

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

struct EstimatorConfig {
    int d = 2;
    double alpha = 1.5;
    double r0 = 0.3;
    double eps = 0.01;
    int m = 30;

    void validate() const {
        check_dimension(d);
        check_order(alpha);
        check_radii(r0, eps);
        if (m < 1) throw InvalidParameter("estimator needs at least one pair per point");
    }

    RadiusLaw law() const { return {d, r0, alpha, eps}; }
};

/// Prefactors of the inner (divided by r_eps^2) and outer second differences.
struct EstimatorWeights {
    double inner = 0.0;  // C |S^{d-1}| r0^{2-alpha} / (2 (2 - alpha))
    double outer = 0.0;  // C |S^{d-1}| r0^{-alpha} / (2 alpha)
};

inline EstimatorWeights estimator_weights(int d, double alpha, double r0) {
    const double base = fractional_constant(d, alpha) * sphere_area(d);
    return {base * std::pow(r0, 2.0 - alpha) / (2.0 * (2.0 - alpha)), base * std::pow(r0, -alpha) / (2.0 * alpha)};
}

inline EstimatorWeights estimator_weights(const EstimatorConfig& cfg) {
    return estimator_weights(cfg.d, cfg.alpha, cfg.r0);
}

namespace detail {

template <ScalarField U>
double second_difference_with(const U& u, std::span<const double> x, double ux, double r, std::span<const double> xi,
                              Eigen::VectorXd& scratch) {
    const auto d = static_cast<Eigen::Index>(x.size());
    scratch.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) scratch[k] = x[k] - r * xi[k];
    const double minus = u(as_span(scratch));
    for (Eigen::Index k = 0; k < d; ++k) scratch[k] = x[k] + r * xi[k];
    const double plus = u(as_span(scratch));
    return 2.0 * ux - minus - plus;
}

// One draw of the unscaled estimator term: inner / r_eps^2 * w_in + outer * w_out.
template <ScalarField U>
double estimator_term(const U& u, std::span<const double> x, double ux, const SampleDraw& s,
                      const EstimatorWeights& w, Eigen::VectorXd& scratch) {
    const double inner = second_difference_with(u, x, ux, s.r_eps, as_span(s.xi), scratch);
    const double outer = second_difference_with(u, x, ux, s.r_o, as_span(s.xi), scratch);
    return w.inner * inner / (s.r_eps * s.r_eps) + w.outer * outer;
}

inline void check_point(std::span<const double> x, int d) {
    if (static_cast<int>(x.size()) != d) throw InvalidShape("point dimension does not match the estimator");
}

}  // namespace detail

/// 2u(x) - u(x - r xi) - u(x + r xi).
template <ScalarField U>
double second_difference(const U& u, std::span<const double> x, double r, std::span<const double> xi) {
    if (!(r > 0.0)) throw InvalidParameter("second_difference: radius must be positive");
    if (xi.size() != x.size()) throw InvalidShape("second_difference: direction dimension mismatch");
    Eigen::VectorXd scratch;
    return detail::second_difference_with(u, x, u(x), r, xi, scratch);
}

struct EstimateStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Sample mean and standard error of the m-draw estimator of (-Delta)^{alpha/2} u at x.
template <ScalarField U>
EstimateStats mc_frac_laplacian_stats(const U& u, std::span<const double> x, const EstimatorConfig& cfg,
                                      RngStream& rng) {
    cfg.validate();
    detail::check_point(x, cfg.d);
    const EstimatorWeights w = estimator_weights(cfg);
    const RadiusLaw law = cfg.law();
    const double ux = u(x);
    if (!std::isfinite(ux)) throw EstimatorFailure("field is not finite at the evaluation point");
    Eigen::VectorXd scratch;
    // Welford accumulation keeps the variance stable for m = 10^6.
    double mean = 0.0, m2 = 0.0;
    for (int j = 0; j < cfg.m; ++j) {
        const SampleDraw s = sample_draw(law, rng);
        const double t = detail::estimator_term(u, x, ux, s, w, scratch);
        if (!std::isfinite(t)) throw EstimatorFailure("non-finite field value inside the estimator");
        const double delta = t - mean;
        mean += delta / (j + 1);
        m2 += delta * (t - mean);
    }
    EstimateStats out;
    out.mean = mean;
    out.samples = static_cast<std::size_t>(cfg.m);
    out.std_error = cfg.m > 1 ? std::sqrt(m2 / (cfg.m - 1) / cfg.m) : std::numeric_limits<double>::infinity();
    return out;
}

template <ScalarField U>
double mc_frac_laplacian(const U& u, std::span<const double> x, const EstimatorConfig& cfg, RngStream& rng) {
    return mc_frac_laplacian_stats(u, x, cfg, rng).mean;
}

/// Single-draw residual w_in * D(r_eps)/r_eps^2 + w_out * D(r_o) - f(x).
///
/// f(x) enters once and unscaled, so that its expectation over the draw equals
/// (-Delta)^{alpha/2} u(x) - f(x) up to the clamp bias.
template <ScalarField U, ScalarField F>
double residual_factor(const U& u, const F& f, std::span<const double> x, const SampleDraw& draw,
                       const EstimatorConfig& cfg) {
    detail::check_point(x, cfg.d);
    Eigen::VectorXd scratch;
    return detail::estimator_term(u, x, u(x), draw, estimator_weights(cfg), scratch) - f(x);
}

/// mu(x, first half) * eta(x, second half): unbiased for the squared residual.
template <ScalarField U, ScalarField F>
double residual_product(const U& u, const F& f, std::span<const double> x, const SamplePair& pair,
                        const EstimatorConfig& cfg) {
    return residual_factor(u, f, x, pair.first, cfg) * residual_factor(u, f, x, pair.second, cfg);
}

}  // namespace mcfpinn
