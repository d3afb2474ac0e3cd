#pragma once

// Error tables over (alpha or dimension) x noise level, and gridded dumps of the
// reconstructed source for plotting.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "loss.hpp"
#include "problem.hpp"
#include "training.hpp"

namespace mcfpinn {

inline constexpr const char* kTableHeader = "row_key,delta,re_f,re_u,seed,epochs,wall_seconds,status";
inline constexpr const char* kTraceHeader = "epoch,loss_total,loss_equ,loss_boundary,loss_data,re_u,re_f";

enum class RowKind { alpha, dimension };

struct TableSpec {
    RowKind kind = RowKind::alpha;
    std::vector<double> rows;    // alpha values, or dimensions
    std::vector<double> deltas;  // noise levels
    ProblemSpec problem;         // the coordinate not swept
    TrainConfig train;           // template; noise_delta and seed are overwritten per cell
    int seeds = 1;               // runs per cell; the median is reported
    int jobs = 1;                // cells trained concurrently
};

struct TableRow {
    double row_key = 0.0;
    double delta = 0.0;
    std::optional<double> re_f;  // empty when every seed diverged
    std::optional<double> re_u;
    std::uint64_t seed = 0;
    std::int64_t epochs = 0;
    double wall_seconds = 0.0;
    std::string status = "ok";
    std::vector<double> re_f_per_seed;
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Trains one cell (all seeds) and summarizes it.
inline TableRow run_cell(const TableSpec& spec, double row_key, double delta) {
    ProblemSpec problem = spec.problem;
    if (spec.kind == RowKind::alpha)
        problem.alpha = row_key;
    else
        problem.d = static_cast<int>(row_key);
    TableRow row;
    row.row_key = row_key;
    row.delta = delta;
    row.seed = spec.train.seed;
    row.epochs = spec.train.epochs;
    std::vector<double> re_f, re_u;
    const auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < std::max(1, spec.seeds); ++k) {
        TrainConfig cfg = spec.train;
        cfg.noise_delta = delta;
        cfg.seed = spec.train.seed + static_cast<std::uint64_t>(k);
        cfg.jobs = 1;
        try {
            const TrainResult r = train(problem, cfg);
            re_f.push_back(r.errors.re_f);
            re_u.push_back(r.errors.re_u);
        } catch (const TrainingDivergence&) {
        }
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.re_f_per_seed = re_f;
    if (re_f.empty()) {
        row.status = "diverged";
    } else {
        row.re_f = median(re_f);
        row.re_u = median(re_u);
        if (static_cast<int>(re_f.size()) < std::max(1, spec.seeds)) row.status = "partial";
    }
    return row;
}

/// One row per (row_key, delta), rows outermost. Cells are independent and may run
/// on `spec.jobs` workers; results do not depend on the worker count.
inline std::vector<TableRow> run_table(const TableSpec& spec) {
    spec.problem.validate();
    spec.train.validate();
    if (spec.rows.empty() || spec.deltas.empty()) throw InvalidParameter("run_table: rows and deltas must be non-empty");
    std::vector<std::pair<double, double>> cells;
    for (double r : spec.rows)
        for (double dl : spec.deltas) cells.emplace_back(r, dl);
    std::vector<TableRow> out(cells.size());
    detail::parallel_for(cells.size(), spec.jobs, [&](std::size_t k) {
        try {
            out[k] = run_cell(spec, cells[k].first, cells[k].second);
        } catch (const Error& e) {
            out[k].row_key = cells[k].first;
            out[k].delta = cells[k].second;
            out[k].seed = spec.train.seed;
            out[k].epochs = spec.train.epochs;
            out[k].status = "failed";
        }
    });
    return out;
}

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
    os << kTableHeader << '\n';
    for (const auto& r : rows) {
        os << format_real(r.row_key) << ',' << format_real(r.delta) << ',' << (r.re_f ? format_real(*r.re_f) : "")
           << ',' << (r.re_u ? format_real(*r.re_u) : "") << ',' << r.seed << ',' << r.epochs << ','
           << format_real(r.wall_seconds) << ',' << r.status << '\n';
    }
}

inline void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
    os << kTraceHeader << '\n';
    for (const auto& e : trace.entries) {
        os << e.loss.epoch << ',' << format_real(e.loss.total) << ',' << format_real(e.loss.equ_term) << ','
           << format_real(e.loss.boundary_term) << ',' << format_real(e.loss.data_term) << ',' << format_real(e.re_u)
           << ',' << format_real(e.re_f) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Grids.

struct GridRow {
    double x1 = 0.0;
    double x2 = 0.0;
    std::optional<double> f_hat;  // empty outside the domain
    std::optional<double> f_star;
};

struct GridDump {
    int d = 2;
    std::vector<double> slice;  // fixed coordinates x3..xd
    std::vector<GridRow> rows;
    std::size_t inside = 0;
};

/// Regular resolution x resolution grid over [-1, 1]^2 in the (x1, x2) plane, with the
/// remaining coordinates fixed to `slice`. Points outside the unit ball are masked.
template <ScalarField F>
GridDump dump_grid(const F& f_hat, const ProblemSpec& spec, int resolution, std::vector<double> slice = {}) {
    spec.validate();
    if (spec.d < 2) throw InvalidParameter("dump_grid: needs at least two dimensions");
    if (resolution < 2) throw InvalidParameter("dump_grid: resolution must be >= 2");
    if (slice.empty()) slice.assign(static_cast<std::size_t>(spec.d - 2), 0.0);
    if (static_cast<int>(slice.size()) != spec.d - 2) throw InvalidShape("dump_grid: slice must fix d - 2 coordinates");

    const ExactSource f_star(spec);
    GridDump g;
    g.d = spec.d;
    g.slice = slice;
    g.rows.reserve(static_cast<std::size_t>(resolution) * resolution);
    Eigen::VectorXd x(spec.d);
    for (int k = 0; k < spec.d - 2; ++k) x[k + 2] = slice[static_cast<std::size_t>(k)];
    for (int a = 0; a < resolution; ++a) {
        for (int b = 0; b < resolution; ++b) {
            x[0] = -1.0 + 2.0 * a / (resolution - 1);
            x[1] = -1.0 + 2.0 * b / (resolution - 1);
            GridRow row{x[0], x[1], std::nullopt, std::nullopt};
            if (x.squaredNorm() <= 1.0) {
                row.f_hat = f_hat(as_span(x));
                row.f_star = f_star(as_span(x));
                ++g.inside;
            }
            g.rows.push_back(row);
        }
    }
    return g;
}

inline void write_grid_csv(std::ostream& os, const GridDump& g) {
    os << "x1,x2,f_hat,f_star,abs_err";
    for (std::size_t k = 0; k < g.slice.size(); ++k) os << ",x" << (k + 3);
    os << '\n';
    for (const auto& r : g.rows) {
        os << format_real(r.x1) << ',' << format_real(r.x2) << ',';
        if (r.f_hat)
            os << format_real(*r.f_hat) << ',' << format_real(*r.f_star) << ',' << format_real(std::abs(*r.f_hat - *r.f_star));
        else
            os << ",,";
        for (double s : g.slice) os << ',' << format_real(s);
        os << '\n';
    }
}

}  // namespace mcfpinn
