#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mcfpinn/loss.hpp"
#include "mcfpinn/problem.hpp"
#include "oracles.hpp"

using namespace mcfpinn;
using mcfpinn::testing::close_relative;
using mcfpinn::testing::finite_difference_gradient;
using mcfpinn::testing::naive_total_loss_ld;
using mcfpinn::testing::flatten;

namespace {

constexpr double kPi = std::numbers::pi;

auto zero = [](std::span<const double>) { return 0.0; };
auto one = [](std::span<const double>) { return 1.0; };

MlpParams random_net(const std::vector<int>& sizes, std::uint64_t seed) {
    MlpParams p = mlp_init(sizes, seed);
    RngStream rng(seed, 77);
    for (auto& b : p.biases)
        for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = rng.uniform() - 0.5;
    return p;
}

struct Fixture {
    EstimatorConfig cfg{2, 1.5, 0.3, 0.01, 2};
    PointSet xs;
    PairGrid grid;
    MeasurementSet meas;
    PointSet boundary;

    explicit Fixture(int n = 4, int m = 2, int d = 2, std::uint64_t seed = 1) {
        cfg.d = d;
        cfg.m = m;
        RngStream rng(seed, 0);
        xs = sample_ball(d, n, rng);
        grid = sample_pair_grid(cfg, static_cast<std::size_t>(n), seed, 3);
        meas = make_measurements(ProblemSpec{d, cfg.alpha}, 5, 0.05, rng);
        boundary = sample_sphere_points(d, 6, rng);
    }

    LossBatch batch() const {
        LossBatch b;
        b.collocation = xs;
        b.pairs = grid;
        b.boundary = boundary;
        b.measurements = &meas;
        return b;
    }
};

}  // namespace

TEST(LossEqu, ZeroSolutionUnitSourceGivesDomainVolume) {
    Fixture fx(8, 3);
    EXPECT_NEAR(loss_equ(zero, one, fx.xs, fx.grid, fx.cfg), kPi, 1e-12);
    EXPECT_EQ(loss_equ(zero, zero, fx.xs, fx.grid, fx.cfg), 0.0);
}

TEST(LossEqu, SinglePointSinglePair) {
    Fixture fx(1, 1);
    const ExactSolution u{2, 1.5};
    const ExactSource f(2, 1.5);
    const Eigen::VectorXd x = fx.xs.col(0);
    const double want = kPi * residual_product(u, f, as_span(x), fx.grid.at(0, 0), fx.cfg);
    EXPECT_NEAR(loss_equ(u, f, fx.xs, fx.grid, fx.cfg), want, 1e-12 * std::abs(want));
}

TEST(LossEqu, ExactPairNearZero) {
    const EstimatorConfig cfg{2, 1.5, 0.3, 0.01, 30};
    const ExactSolution u{2, 1.5};
    const ExactSource f(2, 1.5);
    RngStream rng(2, 0);
    const PointSet xs = sample_ball(2, 64, rng);
    const PairGrid grid = sample_pair_grid(cfg, 64, 2, 0);
    // Standard error from the spread of the individual products.
    std::vector<double> prods;
    Eigen::VectorXd x;
    for (std::size_t i = 0; i < 64; ++i) {
        x = xs.col(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < 30; ++j) prods.push_back(kPi * residual_product(u, f, as_span(x), grid.at(i, j), cfg));
    }
    double s = 0, s2 = 0;
    for (double v : prods) s += v, s2 += v * v;
    const double n = static_cast<double>(prods.size());
    const double se = std::sqrt((s2 / n - (s / n) * (s / n)) / n);
    const double value = loss_equ(u, f, xs, grid, cfg);
    EXPECT_NEAR(value, s / n, 1e-9 * (1 + std::abs(value)));
    EXPECT_LT(std::abs(value), 3 * se);
}

TEST(LossEqu, RejectsMismatchedGrid) {
    Fixture fx(4, 2);
    EXPECT_THROW(loss_equ(zero, one, fx.xs.leftCols(3), fx.grid, fx.cfg), InvalidShape);
}

TEST(LossData, TrivialCasesAndNaiveReference) {
    MeasurementSet s;
    s.points = PointSet::Zero(2, 1);
    s.values = Eigen::VectorXd::Zero(1);
    EXPECT_NEAR(loss_data(one, s), kPi, 1e-14);

    Fixture fx;
    const MlpParams net = random_net({2, 5, 1}, 3);
    const NetField u{&net};
    double ref = 0;
    for (Eigen::Index k = 0; k < fx.meas.size(); ++k) {
        const double r = mlp_forward(net, Point(fx.meas.points.col(k))) - fx.meas.values[k];
        ref += r * r;
    }
    EXPECT_NEAR(loss_data(u, fx.meas), kPi * ref / fx.meas.size(), 1e-12);

    MeasurementSet exact = fx.meas;
    for (Eigen::Index k = 0; k < exact.size(); ++k) exact.values[k] = mlp_forward(net, Point(exact.points.col(k)));
    EXPECT_EQ(loss_data(u, exact), 0.0);
    EXPECT_THROW(loss_data(u, MeasurementSet{}), InvalidParameter);
}

TEST(LossBoundary, TrivialCases) {
    RngStream rng(4, 0);
    const PointSet ys = sample_sphere_points(2, 32, rng);
    EXPECT_NEAR(loss_boundary(one, ys), 2 * kPi, 1e-12);
    EXPECT_EQ(loss_boundary(zero, ys), 0.0);
    const MlpParams net = random_net({2, 6, 1}, 4);
    PointSet axes(2, 4);
    axes << 1, 0, -1, 0,
            0, 1, 0, -1;
    EXPECT_EQ(loss_boundary(SolutionField{&net, BoundaryMode::hard}, axes), 0.0);
}

TEST(TotalLoss, WeightedSum) {
    const LossWeights w{1.0, 0.0, 1.0};
    EXPECT_EQ(total_loss(0.3, 5.0, 0.2, w).total, total_loss(0.3, 17.0, 0.2, w).total);
    EXPECT_EQ(total_loss(0, 0, 0, w).total, 0.0);
    const LossWeights v{0.7, 2.5, 1.3};
    const LossReport r = total_loss(-0.4, 0.9, 0.25, v, 12);
    EXPECT_NEAR(r.total, 0.7 * -0.4 + 2.5 * 0.9 + 1.3 * 0.25, 1e-12);
    EXPECT_EQ(r.epoch, 12);
    EXPECT_THROW(total_loss(0, 0, 0, LossWeights{-1, 0, 1}), InvalidParameter);
    EXPECT_THROW(total_loss(0, 0, 0, LossWeights{0, 0, 0}), InvalidParameter);
}

TEST(LossGradients, ValuesMatchGenericTerms) {
    for (BoundaryMode mode : {BoundaryMode::hard, BoundaryMode::soft}) {
        Fixture fx(9, 4);
        const MlpParams u = random_net({2, 8, 8, 1}, 5), f = random_net({2, 8, 1}, 6);
        const LossWeights w{1.0, 0.5, 2.0};
        const LossEvaluation ev = loss_gradients(u, f, fx.batch(), fx.cfg, w, mode);
        const SolutionField uf{&u, mode};
        const NetField ff{&f};
        const double equ = loss_equ(uf, ff, fx.xs, fx.grid, fx.cfg);
        EXPECT_NEAR(ev.report.equ_term, equ, 1e-10 * (1 + std::abs(equ)));
        EXPECT_NEAR(ev.report.data_term, loss_data(uf, fx.meas), 1e-12);
        if (mode == BoundaryMode::hard) {
            EXPECT_EQ(ev.report.boundary_term, 0.0);
        } else {
            EXPECT_NEAR(ev.report.boundary_term, loss_boundary(NetField{&u}, fx.boundary), 1e-12);
        }
        EXPECT_NEAR(ev.report.total,
                    w.w_equ * ev.report.equ_term + w.w_g * ev.report.boundary_term + w.w_u * ev.report.data_term,
                    1e-12 * (1 + std::abs(ev.report.total)));
    }
}

TEST(LossGradients, MatchFiniteDifferences) {
    for (BoundaryMode mode : {BoundaryMode::hard, BoundaryMode::soft}) {
        Fixture fx(4, 2);
        MlpParams u = random_net({2, 5, 5, 1}, 7), f = random_net({2, 5, 5, 1}, 8);
        const LossWeights w{1.0, 0.5, 1.0};
        const LossBatch batch = fx.batch();
        const LossEvaluation ev = loss_gradients(u, f, batch, fx.cfg, w, mode);
        auto objective = [&] { return naive_total_loss_ld(u, f, batch, fx.cfg, w, mode); };

        const auto gu = flatten(ev.grad_u), fu = finite_difference_gradient(u, objective);
        const auto gf = flatten(ev.grad_f), ff = finite_difference_gradient(f, objective);
        for (std::size_t k = 0; k < gu.size(); ++k)
            EXPECT_TRUE(close_relative(gu[k], fu[k], 1e-5, 1e-7)) << "theta " << k << ": " << gu[k] << " vs " << fu[k];
        for (std::size_t k = 0; k < gf.size(); ++k)
            EXPECT_TRUE(close_relative(gf[k], ff[k], 1e-5, 1e-7)) << "psi " << k << ": " << gf[k] << " vs " << ff[k];
    }
}

TEST(LossGradients, SourceGradientVanishesWithoutEquationTerm) {
    Fixture fx;
    const MlpParams u = random_net({2, 6, 1}, 9), f = random_net({2, 6, 1}, 10);
    const LossEvaluation ev = loss_gradients(u, f, fx.batch(), fx.cfg, LossWeights{0.0, 0.0, 1.0}, BoundaryMode::hard);
    for (double v : flatten(ev.grad_f)) EXPECT_EQ(v, 0.0);
}

TEST(LossGradients, DataWeightScalesItsContributionExactly) {
    Fixture fx;
    const MlpParams u = random_net({2, 6, 1}, 11), f = random_net({2, 6, 1}, 12);
    LossBatch only_data = fx.batch();
    only_data.collocation.resize(2, 0);
    only_data.pairs = PairGrid{};
    const auto g1 = flatten(loss_gradients(u, f, only_data, fx.cfg, LossWeights{1, 0, 1}, BoundaryMode::hard).grad_u);
    const auto g2 = flatten(loss_gradients(u, f, only_data, fx.cfg, LossWeights{1, 0, 2}, BoundaryMode::hard).grad_u);
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_EQ(g2[k], 2 * g1[k]);

    const auto full1 = flatten(loss_gradients(u, f, fx.batch(), fx.cfg, LossWeights{1, 0, 1}, BoundaryMode::hard).grad_u);
    const auto full2 = flatten(loss_gradients(u, f, fx.batch(), fx.cfg, LossWeights{1, 0, 2}, BoundaryMode::hard).grad_u);
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(full2[k] - full1[k], g1[k], 1e-12 * (1 + std::abs(full2[k])));
}

TEST(LossGradients, IndependentOfWorkerCount) {
    Fixture fx(37, 5, 3);
    const MlpParams u = random_net({3, 16, 16, 1}, 13), f = random_net({3, 16, 1}, 14);
    const LossWeights w;
    const LossEvaluation a = loss_gradients(u, f, fx.batch(), fx.cfg, w, BoundaryMode::hard, 1);
    const LossEvaluation b = loss_gradients(u, f, fx.batch(), fx.cfg, w, BoundaryMode::hard, 4);
    EXPECT_EQ(a.report.total, b.report.total);
    EXPECT_EQ(flatten(a.grad_u), flatten(b.grad_u));
    EXPECT_EQ(flatten(a.grad_f), flatten(b.grad_f));
}

TEST(LossGradients, HardModeBoundaryTermAlwaysZero) {
    Fixture fx;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const MlpParams u = random_net({2, 6, 1}, 20 + s), f = random_net({2, 6, 1}, 30 + s);
        EXPECT_EQ(loss_gradients(u, f, fx.batch(), fx.cfg, LossWeights{1, 1, 1}, BoundaryMode::hard).report.boundary_term,
                  0.0);
    }
}

TEST(LossGradients, NonNegativeTermsAndShapeChecks) {
    Fixture fx;
    const MlpParams u = random_net({2, 6, 1}, 40), f = random_net({2, 6, 1}, 41);
    const LossEvaluation ev = loss_gradients(u, f, fx.batch(), fx.cfg, LossWeights{1, 1, 1}, BoundaryMode::soft);
    EXPECT_GE(ev.report.data_term, 0.0);
    EXPECT_GE(ev.report.boundary_term, 0.0);
    const MlpParams wrong = random_net({3, 6, 1}, 42);
    EXPECT_THROW(loss_gradients(wrong, f, fx.batch(), fx.cfg, LossWeights{}, BoundaryMode::hard), InvalidShape);
}
