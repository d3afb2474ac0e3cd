#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mcfpinn/special.hpp"

using namespace mcfpinn;

TEST(LogGamma, KnownValues) {
    EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-14);
    EXPECT_NEAR(log_gamma(0.5), 0.572364942924700087, 1e-12);
    EXPECT_NEAR(log_gamma(5.0), 3.17805383034794562, 1e-12);
}

TEST(LogGamma, MatchesHighPrecisionTable) {
    // mpmath loggamma, 30 digits.
    const std::pair<double, double> table[] = {
        {0.1, 2.25271265173420595987},  {0.25, 1.28802252469807745737}, {2.75, 0.475214666914937130313},
        {12.3, 18.2389834070922419419}, {20.0, 39.3398841871994940362},
    };
    for (const auto& [z, want] : table) EXPECT_NEAR(log_gamma(z), want, 1e-10) << "z=" << z;
}

TEST(LogGamma, AgreesWithStdLgammaOnRange) {
    for (double z = 0.5; z <= 20.0; z += 0.037) EXPECT_NEAR(log_gamma(z), std::lgamma(z), 1e-10) << z;
}

TEST(LogGamma, RejectsNonPositive) {
    EXPECT_THROW(log_gamma(0.0), InvalidParameter);
    EXPECT_THROW(log_gamma(-1.5), InvalidParameter);
}

TEST(FractionalConstant, ClosedFormsAtAlphaOne) {
    const double pi = std::numbers::pi;
    EXPECT_NEAR(fractional_constant(1, 1.0), 1.0 / pi, 1e-12);
    EXPECT_NEAR(fractional_constant(2, 1.0), 1.0 / (2.0 * pi), 1e-12);
    EXPECT_NEAR(fractional_constant(3, 1.0), 1.0 / (pi * pi), 1e-12);
}

TEST(FractionalConstant, HighPrecisionValues) {
    // Direct evaluation of 2^a Gamma((a+d)/2) / (pi^{d/2} |Gamma(-a/2)|) with mpmath.
    EXPECT_NEAR(fractional_constant(2, 1.5), 0.171167129690552342925, 1e-12);
    EXPECT_NEAR(fractional_constant(2, 0.5), 0.0832419838754250654889, 1e-12);
    EXPECT_NEAR(fractional_constant(10, 1.5), 0.150631741493620354482, 1e-12);
}

TEST(FractionalConstant, RejectsOrderOutsideOpenInterval) {
    EXPECT_THROW(fractional_constant(2, 0.0), InvalidParameter);
    EXPECT_THROW(fractional_constant(2, 2.0), InvalidParameter);
    EXPECT_THROW(fractional_constant(0, 1.0), InvalidParameter);
}

TEST(SphereArea, LowDimensions) {
    const double pi = std::numbers::pi;
    EXPECT_NEAR(sphere_area(1), 2.0, 1e-13);
    EXPECT_NEAR(sphere_area(2), 2.0 * pi, 1e-13);
    EXPECT_NEAR(sphere_area(3), 4.0 * pi, 1e-12);
    EXPECT_NEAR(ball_volume(2), pi, 1e-13);
    EXPECT_NEAR(ball_volume(3), 4.0 * pi / 3.0, 1e-12);
}
