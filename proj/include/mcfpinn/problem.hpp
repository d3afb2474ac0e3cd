#pragma once

// The unit-ball benchmark: closed-form solution and source, noisy measurements,
// and relative L2 errors.
//
//   u*(x) = (1 - |x|^2)_+^{1 + alpha/2}
//   f*(x) = 2^alpha Gamma(alpha/2 + 2) Gamma((alpha + d)/2) / Gamma(d/2) * (1 - (1 + alpha/d) |x|^2)

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "errors.hpp"
#include "fractional.hpp"
#include "loss.hpp"
#include "sampling.hpp"
#include "special.hpp"

namespace mcfpinn {

/// Fractional Poisson problem on the unit ball of R^d.
struct ProblemSpec {
    int d = 2;
    double alpha = 1.5;

    void validate() const {
        check_dimension(d);
        check_order(alpha);
    }
};

inline double squared_norm(std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return r2;
}

inline double exact_u(std::span<const double> x, double alpha) {
    const double t = 1.0 - squared_norm(x);
    return t > 0.0 ? std::pow(t, 1.0 + 0.5 * alpha) : 0.0;
}

inline double exact_f_scale(int d, double alpha) {
    return std::exp(alpha * std::log(2.0) + log_gamma(0.5 * alpha + 2.0) + log_gamma(0.5 * (alpha + d)) -
                    log_gamma(0.5 * d));
}

inline double exact_f(std::span<const double> x, int d, double alpha) {
    return exact_f_scale(d, alpha) * (1.0 - (1.0 + alpha / d) * squared_norm(x));
}

struct ExactSolution {
    int d = 2;
    double alpha = 1.5;
    double operator()(std::span<const double> x) const { return exact_u(x, alpha); }
};

/// Caches the Gamma-function prefactor.
struct ExactSource {
    int d = 2;
    double alpha = 1.5;
    double scale = 0.0;

    ExactSource(int d_, double alpha_) : d(d_), alpha(alpha_), scale(exact_f_scale(d_, alpha_)) {}
    explicit ExactSource(const ProblemSpec& p) : ExactSource(p.d, p.alpha) {}

    double operator()(std::span<const double> x) const { return scale * (1.0 - (1.0 + alpha / d) * squared_norm(x)); }
};

/// n uniform points of the ball with values u*(x) (1 + delta xi), xi standard normal.
/// Points are drawn first, then the noise, from the same stream.
inline MeasurementSet make_measurements(const ProblemSpec& spec, Eigen::Index n, double delta, RngStream& rng) {
    spec.validate();
    if (n < 1) throw InvalidParameter("make_measurements: need at least one point");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidParameter("make_measurements: noise level must be >= 0");
    MeasurementSet s;
    s.noise_delta = delta;
    s.points = sample_ball(spec.d, n, rng);
    s.values.resize(n);
    Eigen::VectorXd x;
    for (Eigen::Index k = 0; k < n; ++k) {
        x = s.points.col(k);
        s.values[k] = exact_u(as_span(x), spec.alpha);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const double xi = rng.normal();
        s.values[k] += delta * s.values[k] * xi;
    }
    return s;
}

struct ErrorReport {
    double re_u = 0.0;
    double re_f = 0.0;
    std::int64_t n_test = 0;
    std::uint64_t seed = 0;
};

/// sqrt(sum (c - r)^2) / sqrt(sum r^2) over the given points.
template <ScalarField C, ScalarField R>
double relative_l2_at(const C& candidate, const R& reference, const Eigen::Ref<const PointSet>& points) {
    if (points.cols() < 1) throw InvalidParameter("relative_l2: need at least one test point");
    double num = 0.0, den = 0.0;
    Eigen::VectorXd x;
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        x = points.col(k);
        const double r = reference(as_span(x));
        const double diff = candidate(as_span(x)) - r;
        num += diff * diff;
        den += r * r;
    }
    if (!(den > 0.0)) throw UndefinedMetric("relative_l2: reference vanishes on every test point");
    return std::sqrt(num) / std::sqrt(den);
}

/// Monte Carlo relative L2 error over n_test uniform points of the ball.
template <ScalarField C, ScalarField R>
double relative_l2(const C& candidate, const R& reference, const ProblemSpec& spec, Eigen::Index n_test,
                   RngStream& rng) {
    spec.validate();
    if (n_test < 1) throw InvalidParameter("relative_l2: n_test must be positive");
    return relative_l2_at(candidate, reference, sample_ball(spec.d, n_test, rng));
}

}  // namespace mcfpinn
