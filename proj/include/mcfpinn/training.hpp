#pragma once

// Joint training of the solution network u_theta and the source network f_psi.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "errors.hpp"
#include "fractional.hpp"
#include "loss.hpp"
#include "mlp.hpp"
#include "problem.hpp"
#include "sampling.hpp"

namespace mcfpinn {

struct TrainConfig {
    std::int64_t epochs = 10000;
    int batch_residual = 256;
    double lr_u = 1e-3;
    double lr_f = 1e-4;
    double lr_decay_factor = 0.5;
    std::int64_t lr_decay_every = 2000;
    LossWeights weights;
    double r0 = 0.3;
    double eps_clamp = 0.01;
    int m_pairs = 30;
    int n_measure = 1000;
    double noise_delta = 0.01;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 100;
    bool hard_boundary = true;
    int n_test = 1000;
    int hidden_layers = 4;
    int hidden_width = 64;
    int n_boundary = 256;       // boundary points per step, soft mode only
    bool frozen_pairs = false;  // reuse one pair grid for every step
    bool fixed_collocation = false;
    int jobs = 1;

    void validate() const {
        if (epochs < 1) throw InvalidParameter("epochs must be >= 1");
        if (batch_residual < 1) throw InvalidParameter("batch_residual must be >= 1");
        if (!(lr_u > 0.0) || !(lr_f > 0.0)) throw InvalidParameter("learning rates must be positive");
        if (!(lr_decay_factor > 0.0)) throw InvalidParameter("lr_decay_factor must be positive");
        if (lr_decay_every < 1) throw InvalidParameter("lr_decay_every must be >= 1");
        weights.validate();
        if (m_pairs < 1) throw InvalidParameter("m_pairs must be >= 1");
        if (n_measure < 1) throw InvalidParameter("n_measure must be >= 1");
        if (!(noise_delta >= 0.0 && noise_delta < 1.0)) throw InvalidParameter("noise_delta must lie in [0, 1)");
        if (eval_every < 1) throw InvalidParameter("eval_every must be >= 1");
        if (n_test < 1) throw InvalidParameter("n_test must be >= 1");
        if (hidden_layers < 0 || hidden_width < 1) throw InvalidParameter("invalid network shape");
        if (n_boundary < 0) throw InvalidParameter("n_boundary must be >= 0");
        if (jobs < 1) throw InvalidParameter("jobs must be >= 1");
    }

    EstimatorConfig estimator(const ProblemSpec& p) const { return {p.d, p.alpha, r0, eps_clamp, m_pairs}; }

    std::vector<int> layer_sizes(int d) const {
        std::vector<int> sizes{d};
        for (int k = 0; k < hidden_layers; ++k) sizes.push_back(hidden_width);
        sizes.push_back(1);
        return sizes;
    }

    BoundaryMode boundary_mode() const { return hard_boundary ? BoundaryMode::hard : BoundaryMode::soft; }
};

struct TraceEntry {
    LossReport loss;
    double re_u = 0.0;
    double re_f = 0.0;
};

struct TrainTrace {
    std::vector<TraceEntry> entries;   // logged epochs, strictly increasing
    std::vector<double> loss_history;  // total loss of every step
};

struct TrainResult {
    MlpParams u;
    MlpParams f;
    AdamState adam_u;
    AdamState adam_f;
    TrainTrace trace;
    ErrorReport errors;
    double wall_seconds = 0.0;
};

/// Divergence with the last parameters for which every value was finite.
class DivergedRun : public TrainingDivergence {
public:
    DivergedRun(const std::string& what, std::int64_t epoch, TrainResult partial)
        : TrainingDivergence(what + " at epoch " + std::to_string(epoch)), epoch_(epoch), partial_(std::move(partial)) {}

    std::int64_t epoch() const noexcept { return epoch_; }
    const TrainResult& partial() const noexcept { return partial_; }

private:
    std::int64_t epoch_;
    TrainResult partial_;
};

/// Test points shared by every evaluation of a run.
inline PointSet test_points(const ProblemSpec& problem, const TrainConfig& cfg) {
    RngStream rng(cfg.seed, stream_id(StreamTag::test_points, 0));
    return sample_ball(problem.d, cfg.n_test, rng);
}

inline MeasurementSet training_measurements(const ProblemSpec& problem, const TrainConfig& cfg) {
    RngStream rng(cfg.seed, stream_id(StreamTag::measurement, 0));
    return make_measurements(problem, cfg.n_measure, cfg.noise_delta, rng);
}

inline ErrorReport evaluate_errors(const MlpParams& u, const MlpParams& f, const ProblemSpec& problem,
                                   BoundaryMode mode, const PointSet& points, std::uint64_t seed) {
    ErrorReport r;
    r.re_u = relative_l2_at(SolutionField{&u, mode}, ExactSolution{problem.d, problem.alpha}, points);
    r.re_f = relative_l2_at(NetField{&f}, ExactSource(problem), points);
    r.n_test = points.cols();
    r.seed = seed;
    return r;
}

/// Training batch of step `epoch` (1-based): collocation points, pair grid, boundary points.
inline LossBatch training_batch(const ProblemSpec& problem, const TrainConfig& cfg, std::int64_t epoch,
                                const MeasurementSet* measurements) {
    const auto colloc_epoch = static_cast<std::uint64_t>(cfg.fixed_collocation ? 0 : epoch);
    const auto pair_epoch = static_cast<std::uint64_t>(cfg.frozen_pairs ? 0 : epoch);
    LossBatch batch;
    RngStream colloc(cfg.seed, stream_id(StreamTag::collocation, colloc_epoch));
    batch.collocation = sample_ball(problem.d, cfg.batch_residual, colloc);
    batch.pairs = sample_pair_grid(cfg.estimator(problem), static_cast<std::size_t>(cfg.batch_residual), cfg.seed,
                                   pair_epoch);
    if (!cfg.hard_boundary && cfg.n_boundary > 0) {
        RngStream bnd(cfg.seed, stream_id(StreamTag::boundary, colloc_epoch));
        batch.boundary = sample_sphere_points(problem.d, cfg.n_boundary, bnd);
    }
    batch.measurements = measurements;
    return batch;
}

using TraceCallback = std::function<void(const TraceEntry&)>;

/// Runs `cfg.epochs` Adam steps on the empirical risk. Deterministic in cfg.seed and
/// independent of cfg.jobs. Throws DivergedRun if a loss, gradient or parameter
/// becomes non-finite.
inline TrainResult train(const ProblemSpec& problem, const TrainConfig& cfg, const TraceCallback& on_log = {}) {
    problem.validate();
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const EstimatorConfig est = cfg.estimator(problem);
    est.validate();
    const BoundaryMode mode = cfg.boundary_mode();

    TrainResult res;
    const auto sizes = cfg.layer_sizes(problem.d);
    res.u = mlp_init(sizes, cfg.seed, stream_id(StreamTag::init_u, 0));
    res.f = mlp_init(sizes, cfg.seed, stream_id(StreamTag::init_f, 0));
    res.adam_u = make_adam_state(res.u, {cfg.lr_u, cfg.lr_decay_factor, cfg.lr_decay_every});
    res.adam_f = make_adam_state(res.f, {cfg.lr_f, cfg.lr_decay_factor, cfg.lr_decay_every});
    res.trace.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));

    const MeasurementSet measurements = training_measurements(problem, cfg);
    const PointSet tests = test_points(problem, cfg);

    auto fail = [&](const std::string& why, std::int64_t epoch) {
        res.errors = evaluate_errors(res.u, res.f, problem, mode, tests, cfg.seed);
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        throw DivergedRun(why, epoch, std::move(res));
    };

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const LossBatch batch = training_batch(problem, cfg, epoch, &measurements);
        LossEvaluation ev;
        try {
            ev = loss_gradients(res.u, res.f, batch, est, cfg.weights, mode, cfg.jobs);
        } catch (const TrainingDivergence& e) {
            fail(e.what(), epoch);
        }
        ev.report.epoch = epoch;

        MlpParams u_prev = res.u, f_prev = res.f;
        AdamState au_prev = res.adam_u, af_prev = res.adam_f;
        adam_step(res.u, ev.grad_u, res.adam_u);
        adam_step(res.f, ev.grad_f, res.adam_f);
        if (!all_finite(res.u) || !all_finite(res.f)) {
            res.u = std::move(u_prev);
            res.f = std::move(f_prev);
            res.adam_u = std::move(au_prev);
            res.adam_f = std::move(af_prev);
            fail("parameters became non-finite", epoch);
        }
        res.trace.loss_history.push_back(ev.report.total);

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            const ErrorReport er = evaluate_errors(res.u, res.f, problem, mode, tests, cfg.seed);
            TraceEntry entry{ev.report, er.re_u, er.re_f};
            res.trace.entries.push_back(entry);
            if (on_log) on_log(entry);
        }
    }
    res.errors = evaluate_errors(res.u, res.f, problem, mode, tests, cfg.seed);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace mcfpinn
