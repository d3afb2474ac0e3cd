#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mcfpinn/fractional.hpp"
#include "mcfpinn/problem.hpp"

using namespace mcfpinn;

namespace {

std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }

struct Scaled {
    double c;
    ExactSolution u;
    double operator()(std::span<const double> x) const { return c * u(x); }
};

struct ScaledSource {
    double c;
    ExactSource f;
    double operator()(std::span<const double> x) const { return c * f(x); }
};

auto zero = [](std::span<const double>) { return 0.0; };
auto one = [](std::span<const double>) { return 1.0; };

}  // namespace

TEST(SecondDifference, AffineAndConstantFieldsVanish) {
    auto affine = [](std::span<const double> x) { return 3.0 * x[0] - 2.0 * x[1] + 0.7; };
    auto constant = [](std::span<const double>) { return -4.25; };
    const std::vector<double> x{0.3, -0.4}, xi{0.6, 0.8};
    for (double r : {1e-3, 0.3, 7.0}) {
        EXPECT_NEAR(second_difference(affine, sp(x), r, sp(xi)), 0.0, 1e-12);
        EXPECT_EQ(second_difference(constant, sp(x), r, sp(xi)), 0.0);
    }
}

TEST(SecondDifference, SquaredNormGivesMinusTwoRSquared) {
    auto sq = [](std::span<const double> x) { return squared_norm(x); };
    RngStream rng(1, 0);
    for (int k = 0; k < 50; ++k) {
        const Point x = sample_ball(3, 1, rng).col(0);
        const Point xi = sample_sphere(3, rng);
        const double r = 0.01 + rng.uniform();
        EXPECT_NEAR(second_difference(sq, as_span(x), r, as_span(xi)), -2 * r * r, 1e-12);
    }
}

TEST(SecondDifference, RejectsNonPositiveRadius) {
    const std::vector<double> x{0.0}, xi{1.0};
    EXPECT_THROW(second_difference(zero, sp(x), 0.0, sp(xi)), InvalidParameter);
}

TEST(EstimatorWeights, PositiveForValidParameters) {
    for (int d : {1, 2, 3, 5, 10})
        for (double a : {0.05, 0.5, 1.0, 1.5, 1.95})
            for (double r0 : {0.1, 0.3, 1.0}) {
                const auto w = estimator_weights(d, a, r0);
                EXPECT_GT(w.inner, 0.0);
                EXPECT_GT(w.outer, 0.0);
            }
}

TEST(McFracLaplacian, ZeroFieldIsExactlyZero) {
    RngStream rng(2, 0);
    const std::vector<double> x{0.2, 0.1};
    EXPECT_EQ(mc_frac_laplacian(zero, sp(x), EstimatorConfig{2, 1.5, 0.3, 0.01, 1000}, rng), 0.0);
}

TEST(McFracLaplacian, MatchesClosedFormSourceAtOrigin) {
    const ExactSolution u{2, 1.5};
    RngStream rng(3, 0);
    const std::vector<double> x{0.0, 0.0};
    const auto est = mc_frac_laplacian_stats(u, sp(x), EstimatorConfig{2, 1.5, 0.3, 1e-4, 1000000}, rng);
    const double want = 4.18093253743319304730;  // f* at the origin for d=2, alpha=1.5
    EXPECT_NEAR(est.mean, want, 0.01 * want);
    EXPECT_EQ(est.samples, 1000000u);
}

TEST(McFracLaplacian, MatchesClosedFormSourceOffCentre) {
    const ExactSolution u{2, 0.5};
    RngStream rng(4, 0);
    const std::vector<double> x{0.5, 0.0};
    const auto est = mc_frac_laplacian_stats(u, sp(x), EstimatorConfig{2, 0.5, 0.3, 0.01, 1000000}, rng);
    const double want = 0.998481173894738987284;  // f*((0.5, 0)) for d=2, alpha=0.5
    EXPECT_NEAR(est.mean, want, 0.01 * want + 3 * est.std_error);
}

TEST(McFracLaplacian, LinearInTheFieldUnderSharedDraws) {
    const ExactSolution u{3, 1.2};
    auto v = [](std::span<const double> x) { return std::exp(-squared_norm(x)); };
    auto combo = [&](std::span<const double> x) { return 2.5 * u(x) - 0.75 * v(x); };
    const EstimatorConfig cfg{3, 1.2, 0.3, 0.01, 2000};
    const std::vector<double> x{0.1, -0.2, 0.3};
    RngStream a(5, 9), b(5, 9), c(5, 9);
    const double eu = mc_frac_laplacian(u, sp(x), cfg, a);
    const double ev = mc_frac_laplacian(v, sp(x), cfg, b);
    const double ec = mc_frac_laplacian(combo, sp(x), cfg, c);
    EXPECT_NEAR(ec, 2.5 * eu - 0.75 * ev, 1e-12 * (1 + std::abs(ec)));
}

TEST(McFracLaplacian, ClampBiasWithinMonteCarloError) {
    const std::vector<double> x{0.2, -0.1};
    for (double alpha : {0.5, 1.0, 1.5}) {
        const ExactSolution u{2, alpha};
        RngStream r1(6, 1), r2(6, 2);
        const auto coarse = mc_frac_laplacian_stats(u, sp(x), EstimatorConfig{2, alpha, 0.3, 0.01, 1000000}, r1);
        const auto fine = mc_frac_laplacian_stats(u, sp(x), EstimatorConfig{2, alpha, 0.3, 0.005, 1000000}, r2);
        const double se = std::hypot(coarse.std_error, fine.std_error);
        EXPECT_LT(std::abs(coarse.mean - fine.mean), 3 * se) << "alpha=" << alpha;
    }
}

TEST(McFracLaplacian, NonFiniteFieldRaises) {
    auto bad = [](std::span<const double> x) { return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    RngStream rng(7, 0);
    const std::vector<double> x{0.0};
    EXPECT_THROW(mc_frac_laplacian(bad, sp(x), EstimatorConfig{1, 1.0, 0.3, 0.01, 10000}, rng), EstimatorFailure);
}

TEST(McFracLaplacian, RejectsInvalidConfigAndShape) {
    RngStream rng(7, 0);
    const std::vector<double> x{0.0, 0.0};
    EXPECT_THROW(mc_frac_laplacian(zero, sp(x), EstimatorConfig{2, 2.0, 0.3, 0.01, 10}, rng), InvalidParameter);
    EXPECT_THROW(mc_frac_laplacian(zero, sp(x), EstimatorConfig{2, 1.0, 0.3, 0.3, 10}, rng), InvalidParameter);
    EXPECT_THROW(mc_frac_laplacian(zero, sp(x), EstimatorConfig{2, 1.0, 0.3, 0.01, 0}, rng), InvalidParameter);
    EXPECT_THROW(mc_frac_laplacian(zero, sp(x), EstimatorConfig{3, 1.0, 0.3, 0.01, 10}, rng), InvalidShape);
}

TEST(ResidualFactor, TrivialFields) {
    const EstimatorConfig cfg{2, 1.5, 0.3, 0.01, 1};
    RngStream rng(8, 0);
    const std::vector<double> x{0.1, 0.2};
    for (int k = 0; k < 20; ++k) {
        const SamplePair p = sample_pair(cfg.law(), rng);
        EXPECT_EQ(residual_factor(zero, zero, sp(x), p.first, cfg), 0.0);
        EXPECT_EQ(residual_factor(zero, one, sp(x), p.first, cfg), -1.0);
        EXPECT_EQ(residual_product(zero, one, sp(x), p, cfg), 1.0);
    }
}

TEST(ResidualFactor, ExactPairHasZeroMeanResidual) {
    const ProblemSpec spec{2, 1.5};
    const ExactSolution u{2, 1.5};
    const ExactSource f(spec);
    const EstimatorConfig cfg{2, 1.5, 0.3, 1e-4, 1};
    RngStream rng(9, 0);
    const std::vector<double> x{0.3, 0.2};
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int k = 0; k < n; ++k) {
        const double v = residual_factor(u, f, sp(x), sample_draw(cfg.law(), rng), cfg);
        s += v, s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean), 3 * se);
}

TEST(ResidualProduct, ExactPairMeanVanishesAndHalvesAreExchangeable) {
    const ProblemSpec spec{2, 1.5};
    const ExactSolution u{2, 1.5};
    const ExactSource f(spec);
    const EstimatorConfig cfg{2, 1.5, 0.3, 1e-4, 1};
    RngStream rng(10, 0);
    const std::vector<double> x{0.0, 0.0};
    const int n = 100000;
    double s = 0, s2 = 0, sw = 0;
    for (int k = 0; k < n; ++k) {
        const SamplePair p = sample_pair(cfg.law(), rng);
        const double v = residual_product(u, f, sp(x), p, cfg);
        s += v, s2 += v * v;
        sw += residual_product(u, f, sp(x), SamplePair{p.second, p.first}, cfg);
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean), 3 * se);
    // Swapping the halves of the same pair gives the same product up to rounding.
    EXPECT_NEAR(sw / n, mean, 1e-9 * (1 + std::abs(mean)) + 1e-12);
}

TEST(ResidualProduct, ErrorShrinksLikeInverseSquareRoot) {
    const ProblemSpec spec{2, 1.5};
    const Scaled u{1.2, ExactSolution{2, 1.5}};
    const ScaledSource f{1.0, ExactSource(spec)};
    const EstimatorConfig cfg{2, 1.5, 0.3, 1e-6, 1};
    const std::vector<double> x{0.0, 0.0};
    const double rho = 0.2 * 4.18093253743319304730;
    const double target = rho * rho;

    const int reps = 20;
    std::vector<double> log_m, log_err;
    for (int M : {1000, 10000, 100000}) {
        double sq = 0;
        for (int r = 0; r < reps; ++r) {
            RngStream rng(11, stream_id(StreamTag::estimate, static_cast<std::uint64_t>(M), r));
            double s = 0;
            for (int k = 0; k < M; ++k) s += residual_product(u, f, sp(x), sample_pair(cfg.law(), rng), cfg);
            const double e = s / M - target;
            sq += e * e;
        }
        log_m.push_back(std::log(static_cast<double>(M)));
        log_err.push_back(0.5 * std::log(sq / reps));
    }
    const double slope = (log_err.back() - log_err.front()) / (log_m.back() - log_m.front());
    EXPECT_GE(slope, -0.65);
    EXPECT_LE(slope, -0.35);
}
