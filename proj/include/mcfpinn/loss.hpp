#pragma once

// Empirical risk of the inverse source problem and its exact parameter gradients.
//
//   total = w_equ * L_equ + w_g * L_g + w_u * L_u
//   L_equ = |Omega| / (N m) sum_{i,j} mu(x_i, P_j) eta(x_i, P_j)
//   L_g   = |dOmega| / N_g sum_k u(y_k)^2
//   L_u   = |Omega| / N_u sum_k (u(z_k) - u_k)^2
//
// The generic functions below accept any ScalarField. loss_gradients() is the
// network-specialized path used for training: it evaluates every network site in
// batched form and differentiates through the chain rule in one reverse sweep.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "fractional.hpp"
#include "mlp.hpp"
#include "sampling.hpp"
#include "special.hpp"

namespace mcfpinn {

struct LossWeights {
    double w_equ = 1.0;
    double w_g = 0.0;
    double w_u = 1.0;

    void validate() const {
        if (w_equ < 0.0 || w_g < 0.0 || w_u < 0.0) throw InvalidParameter("loss weights must be non-negative");
        if (!(w_equ > 0.0 || w_g > 0.0 || w_u > 0.0)) throw InvalidParameter("at least one loss weight must be positive");
    }
};

struct MeasurementSet {
    PointSet points;         // d x N_u
    Eigen::VectorXd values;  // noisy u at each point
    double noise_delta = 0.0;

    Eigen::Index size() const { return points.cols(); }
};

struct LossReport {
    double total = 0.0;
    double equ_term = 0.0;
    double boundary_term = 0.0;
    double data_term = 0.0;
    std::int64_t epoch = 0;
};

inline LossReport total_loss(double equ_term, double boundary_term, double data_term, const LossWeights& w,
                             std::int64_t epoch = 0) {
    w.validate();
    LossReport r;
    r.equ_term = equ_term;
    r.boundary_term = boundary_term;
    r.data_term = data_term;
    r.total = w.w_equ * equ_term + w.w_g * boundary_term + w.w_u * data_term;
    r.epoch = epoch;
    return r;
}

/// N x m grid of sample pairs, row-major by collocation point.
struct PairGrid {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<SamplePair> pairs;

    const SamplePair& at(std::size_t i, std::size_t j) const { return pairs[i * m + j]; }
};

/// Pairs for collocation point i come from their own stream (pairs, epoch, i).
inline PairGrid sample_pair_grid(const EstimatorConfig& cfg, std::size_t n, std::uint64_t seed,
                                 std::uint64_t epoch) {
    cfg.validate();
    PairGrid g;
    g.n = n;
    g.m = static_cast<std::size_t>(cfg.m);
    g.pairs.reserve(n * g.m);
    const RadiusLaw law = cfg.law();
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(seed, stream_id(StreamTag::pairs, epoch, i));
        for (std::size_t j = 0; j < g.m; ++j) g.pairs.push_back(sample_pair(law, rng));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Generic terms.

template <ScalarField U, ScalarField F>
double loss_equ(const U& u, const F& f, const Eigen::Ref<const PointSet>& xs, const PairGrid& grid,
                const EstimatorConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(xs.cols()) != grid.n || grid.pairs.size() != grid.n * grid.m)
        throw InvalidShape("loss_equ: pair grid does not match the collocation set");
    if (grid.n == 0 || grid.m == 0) throw InvalidParameter("loss_equ: empty collocation set");
    double sum = 0.0;
    Eigen::VectorXd x;
    for (std::size_t i = 0; i < grid.n; ++i) {
        x = xs.col(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < grid.m; ++j) sum += residual_product(u, f, as_span(x), grid.at(i, j), cfg);
    }
    const double value = ball_volume(cfg.d) * sum / static_cast<double>(grid.n * grid.m);
    if (!std::isfinite(value)) throw TrainingDivergence("loss_equ: non-finite residual product");
    return value;
}

template <ScalarField U>
double loss_data(const U& u, const MeasurementSet& s) {
    if (s.size() == 0) throw InvalidParameter("loss_data: empty measurement set");
    if (s.values.size() != s.size()) throw InvalidShape("loss_data: points and values differ in length");
    double sum = 0.0;
    Eigen::VectorXd x;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        x = s.points.col(k);
        const double r = u(as_span(x)) - s.values[k];
        sum += r * r;
    }
    return ball_volume(static_cast<int>(s.points.rows())) * sum / static_cast<double>(s.size());
}

template <ScalarField U>
double loss_boundary(const U& u, const Eigen::Ref<const PointSet>& ys) {
    if (ys.cols() == 0) return 0.0;
    double sum = 0.0;
    Eigen::VectorXd y;
    for (Eigen::Index k = 0; k < ys.cols(); ++k) {
        y = ys.col(k);
        const double v = u(as_span(y));
        sum += v * v;
    }
    return sphere_area(static_cast<int>(ys.rows())) * sum / static_cast<double>(ys.cols());
}

// ---------------------------------------------------------------------------
// Network fields.

/// How the u-network is turned into a field on all of R^d.
enum class BoundaryMode {
    hard,  // u(x) = (1 - |x|^2)_+ * u_NN(x)
    soft,  // u(x) = u_NN(x) on the closed unit ball, 0 outside; boundary term penalizes u_NN on the sphere
};

inline double field_multiplier(std::span<const double> x, BoundaryMode mode) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    if (mode == BoundaryMode::hard) return std::max(0.0, 1.0 - r2);
    return r2 <= 1.0 ? 1.0 : 0.0;
}

/// The u-network seen as a field on R^d.
struct SolutionField {
    const MlpParams* net = nullptr;
    BoundaryMode mode = BoundaryMode::hard;

    double operator()(std::span<const double> x) const {
        const double mult = field_multiplier(x, mode);
        return mult == 0.0 ? 0.0 : mult * mlp_forward(*net, x);
    }
};

/// A network evaluated as-is, e.g. the source network or u_NN on the boundary.
struct NetField {
    const MlpParams* net = nullptr;
    double operator()(std::span<const double> x) const { return mlp_forward(*net, x); }
};

// ---------------------------------------------------------------------------
// Batched value and gradient.

struct LossBatch {
    PointSet collocation;                    // d x N
    PairGrid pairs;                          // N x m
    PointSet boundary;                       // d x N_g, only read in soft mode
    const MeasurementSet* measurements = nullptr;
};

struct LossEvaluation {
    LossReport report;
    GradBuffer grad_u;
    GradBuffer grad_f;
};

namespace detail {

// Collocation points handled per work item. Fixed so the reduction order does not
// depend on the number of workers.
inline constexpr std::size_t kPointsPerChunk = 2;

struct ChunkResult {
    double equ_sum = 0.0;
    GradBuffer grad_u;
    bool touched = false;
};

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), count);
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Loss report plus gradients with respect to both networks.
///
/// Every network site (x, x +- r_eps xi, x +- r_o xi and the primed copies) contributes
/// through the chain rule, including the boundary multiplier. Sites where the
/// multiplier vanishes are skipped since they carry neither value nor gradient.
inline LossEvaluation loss_gradients(const MlpParams& u_net, const MlpParams& f_net, const LossBatch& batch,
                                     const EstimatorConfig& cfg, const LossWeights& weights, BoundaryMode mode,
                                     int jobs = 1, bool with_gradients = true) {
    cfg.validate();
    weights.validate();
    validate(u_net);
    validate(f_net);
    const int d = cfg.d;
    if (u_net.input_dim() != d || f_net.input_dim() != d) throw InvalidShape("network input width differs from d");
    const auto n = static_cast<std::size_t>(batch.collocation.cols());
    const std::size_t m = batch.pairs.m;
    if (batch.collocation.rows() != d || batch.pairs.n != n || batch.pairs.pairs.size() != n * m ||
        (n > 0 && m != static_cast<std::size_t>(cfg.m)))
        throw InvalidShape("loss_gradients: collocation set and pair grid disagree");

    const EstimatorWeights kw = estimator_weights(cfg);
    const double omega = ball_volume(d);

    LossEvaluation out;
    out.grad_u = zeros_like(u_net);
    out.grad_f = zeros_like(f_net);
    double equ_term = 0.0, boundary_term = 0.0, data_term = 0.0;

    // Equation term.
    if (n > 0) {
        ForwardCache f_cache;
        mlp_forward_cached(f_net, batch.collocation, f_cache);
        const Eigen::RowVectorXd& fx = f_cache.output;
        Eigen::RowVectorXd f_upstream = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
        const double scale = weights.w_equ * omega / static_cast<double>(n * m);
        const bool backprop = with_gradients && weights.w_equ > 0.0;

        const std::size_t chunks = (n + detail::kPointsPerChunk - 1) / detail::kPointsPerChunk;
        std::vector<detail::ChunkResult> results(chunks);
        const std::size_t sites_per_point = 1 + 8 * m;

        detail::parallel_for(chunks, jobs, [&](std::size_t c) {
            const std::size_t i0 = c * detail::kPointsPerChunk;
            const std::size_t i1 = std::min(n, i0 + detail::kPointsPerChunk);
            const std::size_t sites = (i1 - i0) * sites_per_point;

            // Site coordinates, multipliers, and column in the compact batch (-1 if skipped).
            PointSet coords(d, static_cast<Eigen::Index>(sites));
            std::vector<double> mult(sites, 0.0);
            std::vector<Eigen::Index> column(sites, -1);
            Eigen::Index active = 0;
            auto place = [&](std::size_t slot, const Eigen::VectorXd& y) {
                const double mu = field_multiplier(as_span(y), mode);
                mult[slot] = mu;
                if (mu != 0.0) {
                    coords.col(active) = y;
                    column[slot] = active++;
                }
            };
            Eigen::VectorXd y(d);
            for (std::size_t i = i0; i < i1; ++i) {
                const std::size_t base = (i - i0) * sites_per_point;
                const auto x = batch.collocation.col(static_cast<Eigen::Index>(i));
                y = x;
                place(base, y);
                for (std::size_t j = 0; j < m; ++j) {
                    const SamplePair& p = batch.pairs.at(i, j);
                    const std::size_t s = base + 1 + 8 * j;
                    const SampleDraw* halves[2] = {&p.first, &p.second};
                    for (int h = 0; h < 2; ++h) {
                        const SampleDraw& dr = *halves[h];
                        y = x - dr.r_eps * dr.xi;
                        place(s + 4 * h + 0, y);
                        y = x + dr.r_eps * dr.xi;
                        place(s + 4 * h + 1, y);
                        y = x - dr.r_o * dr.xi;
                        place(s + 4 * h + 2, y);
                        y = x + dr.r_o * dr.xi;
                        place(s + 4 * h + 3, y);
                    }
                }
            }

            ForwardCache cache;
            mlp_forward_cached(u_net, coords.leftCols(active), cache);
            std::vector<double> value(sites, 0.0);
            for (std::size_t slot = 0; slot < sites; ++slot)
                if (column[slot] >= 0) value[slot] = mult[slot] * cache.output(column[slot]);

            std::vector<double> site_grad(backprop ? sites : 0, 0.0);
            double equ_sum = 0.0;
            for (std::size_t i = i0; i < i1; ++i) {
                const std::size_t base = (i - i0) * sites_per_point;
                const double uc = value[base];
                const double fi = fx(static_cast<Eigen::Index>(i));
                double df = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const SamplePair& p = batch.pairs.at(i, j);
                    const std::size_t s = base + 1 + 8 * j;
                    double factor[2];
                    double inner_w[2];
                    const SampleDraw* halves[2] = {&p.first, &p.second};
                    for (int h = 0; h < 2; ++h) {
                        const SampleDraw& dr = *halves[h];
                        const std::size_t q = s + 4 * h;
                        inner_w[h] = kw.inner / (dr.r_eps * dr.r_eps);
                        factor[h] = inner_w[h] * (2.0 * uc - value[q] - value[q + 1]) +
                                    kw.outer * (2.0 * uc - value[q + 2] - value[q + 3]) - fi;
                    }
                    equ_sum += factor[0] * factor[1];
                    if (!backprop) continue;
                    for (int h = 0; h < 2; ++h) {
                        // d(mu eta)/d(factor h) is the other factor.
                        const double g = scale * factor[1 - h];
                        const std::size_t q = s + 4 * h;
                        site_grad[base] += g * 2.0 * (inner_w[h] + kw.outer);
                        site_grad[q] -= g * inner_w[h];
                        site_grad[q + 1] -= g * inner_w[h];
                        site_grad[q + 2] -= g * kw.outer;
                        site_grad[q + 3] -= g * kw.outer;
                        df -= g;
                    }
                }
                if (backprop) f_upstream(static_cast<Eigen::Index>(i)) = df;
            }

            detail::ChunkResult& res = results[c];
            res.equ_sum = equ_sum;
            if (backprop && active > 0) {
                Eigen::RowVectorXd upstream(active);
                for (std::size_t slot = 0; slot < sites; ++slot)
                    if (column[slot] >= 0) upstream(column[slot]) = site_grad[slot] * mult[slot];
                res.grad_u = zeros_like(u_net);
                mlp_backward_cached(u_net, cache, upstream, res.grad_u);
                res.touched = true;
            }
        });

        double equ_sum = 0.0;
        for (const auto& res : results) {
            equ_sum += res.equ_sum;
            if (res.touched) out.grad_u += res.grad_u;
        }
        equ_term = omega * equ_sum / static_cast<double>(n * m);
        if (backprop) mlp_backward_cached(f_net, f_cache, f_upstream, out.grad_f);
    }

    // Boundary term: only meaningful without the hard multiplier.
    if (mode == BoundaryMode::soft && batch.boundary.cols() > 0) {
        if (batch.boundary.rows() != d) throw InvalidShape("boundary points have the wrong dimension");
        ForwardCache cache;
        mlp_forward_cached(u_net, batch.boundary, cache);
        const double area = sphere_area(d);
        const double ng = static_cast<double>(batch.boundary.cols());
        boundary_term = area * cache.output.squaredNorm() / ng;
        if (with_gradients && weights.w_g > 0.0) {
            const Eigen::RowVectorXd upstream = (weights.w_g * 2.0 * area / ng) * cache.output;
            mlp_backward_cached(u_net, cache, upstream, out.grad_u);
        }
    }

    // Data misfit.
    if (batch.measurements != nullptr) {
        const MeasurementSet& s = *batch.measurements;
        if (s.size() == 0) throw InvalidParameter("loss_data: empty measurement set");
        if (s.points.rows() != d || s.values.size() != s.size()) throw InvalidShape("measurement set shape mismatch");
        ForwardCache cache;
        mlp_forward_cached(u_net, s.points, cache);
        Eigen::RowVectorXd mult(s.size());
        for (Eigen::Index k = 0; k < s.size(); ++k) {
            const Eigen::VectorXd z = s.points.col(k);
            mult(k) = field_multiplier(as_span(z), mode);
        }
        const Eigen::RowVectorXd resid = mult.cwiseProduct(cache.output) - s.values.transpose();
        const double nu = static_cast<double>(s.size());
        data_term = omega * resid.squaredNorm() / nu;
        if (with_gradients && weights.w_u > 0.0) {
            const Eigen::RowVectorXd upstream = (weights.w_u * 2.0 * omega / nu) * resid.cwiseProduct(mult);
            mlp_backward_cached(u_net, cache, upstream, out.grad_u);
        }
    }

    out.report = total_loss(equ_term, boundary_term, data_term, weights);
    if (!std::isfinite(out.report.total)) throw TrainingDivergence("loss is not finite");
    if (with_gradients && (!out.grad_u.all_finite() || !out.grad_f.all_finite()))
        throw TrainingDivergence("loss gradient is not finite");
    return out;
}

}  // namespace mcfpinn
