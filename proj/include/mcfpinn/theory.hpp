#pragma once

// Network-size and sample-count suggestions from the convergence-rate theorem:
//
//   depth        D = C log(d + 1)
//   width        n = C(d) eps^{-d / (1 - zeta)}
//   weight bound B = C(d) eps^{-(9d + 8) / (2 - 2 zeta)}
//   samples      N = C eps^{-(23d + 18 - 2 zeta) / (1 - zeta)}
//
// The constants are not computable in closed form, so they are user inputs that
// default to 1. Results are order-of-magnitude guidance only.

#include <cmath>

#include "errors.hpp"
#include "special.hpp"

namespace mcfpinn {

struct RateConstants {
    double depth = 1.0;
    double width = 1.0;
    double bound = 1.0;
    double samples = 1.0;
};

/// Exponents of 1/eps in the width, weight bound and sample count.
struct RateExponents {
    double width = 0.0;
    double bound = 0.0;
    double samples = 0.0;
};

inline RateExponents rate_exponents(int d, double zeta) {
    return {d / (1.0 - zeta), (9.0 * d + 8.0) / (2.0 - 2.0 * zeta), (23.0 * d + 18.0 - 2.0 * zeta) / (1.0 - zeta)};
}

struct RateSuggestion {
    long depth = 0;
    // Width and sample count overflow 64-bit integers for modest eps, so they are kept
    // as integer-valued doubles.
    double width = 0.0;
    double weight_bound = 0.0;
    double n_samples = 0.0;
    double eps_target = 0.0;
    double zeta = 0.0;
    int d = 0;
    RateConstants constants;
    RateExponents exponents;
};

inline RateSuggestion suggest_params(double eps, int d, double zeta, const RateConstants& c = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidParameter("target accuracy eps must lie in (0, 1)");
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidParameter("zeta must lie in (0, 1)");
    check_dimension(d);
    if (!(c.depth > 0.0 && c.width > 0.0 && c.bound > 0.0 && c.samples > 0.0))
        throw InvalidParameter("rate constants must be positive");

    RateSuggestion s;
    s.eps_target = eps;
    s.zeta = zeta;
    s.d = d;
    s.constants = c;
    s.exponents = rate_exponents(d, zeta);
    const double inv = 1.0 / eps;
    s.depth = static_cast<long>(std::ceil(c.depth * std::log(d + 1.0)));
    s.width = std::ceil(c.width * std::pow(inv, s.exponents.width));
    s.weight_bound = c.bound * std::pow(inv, s.exponents.bound);
    s.n_samples = std::ceil(c.samples * std::pow(inv, s.exponents.samples));
    return s;
}

}  // namespace mcfpinn
