#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcfpinn/mcfpinn.hpp"

namespace mcfpinn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_reals(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string("invalid number '") + item + "' in " + what);
        }
    }
    if (out.empty()) throw UsageError(std::string(what) + " must not be empty");
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + path.string());
    os << text;
}

json errors_json(const RunConfig& cfg, const TrainResult& r, const std::string& status) {
    json j;
    j["status"] = status;
    j["run_name"] = cfg.run_name;
    j["dim"] = cfg.problem.d;
    j["alpha"] = cfg.problem.alpha;
    j["noise_delta"] = cfg.train.noise_delta;
    j["epochs"] = cfg.train.epochs;
    j["seed"] = cfg.train.seed;
    j["n_test"] = r.errors.n_test;
    j["re_u"] = r.errors.re_u;
    j["re_f"] = r.errors.re_f;
    j["wall_seconds"] = r.wall_seconds;
    return j;
}

void write_artifacts(const RunConfig& cfg, const TrainResult& r, const std::string& status, std::ostream& err) {
    const fs::path dir(cfg.out_dir);
    std::ostringstream trace;
    write_trace_csv(trace, r.trace);
    write_text(dir / "trace.csv", trace.str());
    write_text(dir / "errors.json", errors_json(cfg, r, status).dump(2) + "\n");
    checkpoint_save(dir / "u.ckpt", r.u, &r.adam_u);
    checkpoint_save(dir / "f.ckpt", r.f, &r.adam_f);
    if (cfg.problem.d >= 2) {
        const GridDump g = dump_grid(NetField{&r.f}, cfg.problem, cfg.grid_resolution, cfg.grid_slice);
        if (g.inside == 0) err << "warning: grid slice does not intersect the domain\n";
        std::ostringstream grid;
        write_grid_csv(grid, g);
        write_text(dir / "grid.csv", grid.str());
    }
}

RunConfig load_config(const std::string& path, std::vector<std::string> overrides, const CLI::Option* seed_opt,
                      std::uint64_t seed) {
    if (seed_opt && seed_opt->count() > 0) overrides.push_back("seed=" + std::to_string(seed));
    return load_run_config(path, overrides);
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, const CLI::Option* seed_opt,
            std::uint64_t seed, int jobs, bool quiet, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_config(config_path, overrides, seed_opt, seed);
    cfg.train.jobs = jobs;
    fs::create_directories(cfg.out_dir);

    TraceCallback log;
    if (!quiet) {
        log = [&err](const TraceEntry& e) {
            err << "epoch " << e.loss.epoch << "  loss " << e.loss.total << "  re_u " << e.re_u << "  re_f " << e.re_f
                << '\n';
        };
    }
    try {
        const TrainResult r = train(cfg.problem, cfg.train, log);
        write_artifacts(cfg, r, "ok", err);
        out << errors_json(cfg, r, "ok").dump() << '\n';
        return kOk;
    } catch (const DivergedRun& e) {
        err << "error: training diverged: " << e.what() << '\n';
        write_artifacts(cfg, e.partial(), "diverged", err);
        return kDiverged;
    }
}

int cmd_table(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& rows,
              const std::string& deltas, const std::string& row_kind, int seeds, int jobs, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
    const RunConfig cfg = load_run_config(config_path, overrides);
    TableSpec spec;
    if (row_kind == "alpha")
        spec.kind = RowKind::alpha;
    else if (row_kind == "dim")
        spec.kind = RowKind::dimension;
    else
        throw UsageError("--row-kind must be 'alpha' or 'dim'");
    spec.rows = parse_reals(rows, "--rows");
    spec.deltas = parse_reals(deltas, "--deltas");
    for (double r : spec.rows) {
        if (spec.kind == RowKind::alpha && !(r > 0.0 && r < 2.0)) throw UsageError("alpha rows must lie in (0, 2)");
        if (spec.kind == RowKind::dimension && (r < 1.0 || r != std::floor(r)))
            throw UsageError("dimension rows must be positive integers");
    }
    for (double d : spec.deltas)
        if (!(d >= 0.0 && d < 1.0)) throw UsageError("noise levels must lie in [0, 1)");
    if (seeds < 1) throw UsageError("--seeds must be >= 1");
    spec.problem = cfg.problem;
    spec.train = cfg.train;
    spec.seeds = seeds;
    spec.jobs = jobs;

    const auto table = run_table(spec);
    const fs::path path = out_path.empty() ? fs::path(cfg.out_dir) / "table.csv" : fs::path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ostringstream csv;
    write_table_csv(csv, table);
    write_text(path, csv.str());
    out << csv.str();

    std::size_t ok = 0;
    for (const auto& row : table) ok += row.re_f.has_value();
    if (ok == 0) {
        err << "error: every table cell failed\n";
        return kDiverged;
    }
    return kOk;
}

int cmd_suggest(double eps, int dim, double zeta, const RateConstants& c, std::ostream& out) {
    const RateSuggestion s = suggest_params(eps, dim, zeta, c);
    json j;
    j["guidance_only"] = true;
    j["eps"] = s.eps_target;
    j["dim"] = s.d;
    j["zeta"] = s.zeta;
    j["depth"] = s.depth;
    j["width"] = s.width;
    j["weight_bound"] = s.weight_bound;
    j["n_samples"] = s.n_samples;
    j["exponents"] = {{"width", s.exponents.width}, {"weight_bound", s.exponents.bound}, {"n_samples", s.exponents.samples}};
    j["constants"] = {{"depth", c.depth}, {"width", c.width}, {"bound", c.bound}, {"samples", c.samples}};
    out << j.dump(2) << '\n';
    return kOk;
}

struct EstimateArgs {
    std::string config;
    std::string point;
    std::string field = "exact";
    std::string ckpt;
    int dim = 2;
    double alpha = 1.5;
    double r0 = 0.3;
    double eps = 0.01;
    long m = 1000000;
    std::uint64_t seed = 0;
    bool hard_boundary = true;
};

int cmd_estimate(EstimateArgs a, const CLI::App& sub, std::ostream& out) {
    std::string f_ckpt;
    if (!a.config.empty()) {
        const RunConfig cfg = load_run_config(a.config);
        if (sub.get_option("--dim")->count() == 0) a.dim = cfg.problem.d;
        if (sub.get_option("--alpha")->count() == 0) a.alpha = cfg.problem.alpha;
        if (sub.get_option("--r0")->count() == 0) a.r0 = cfg.train.r0;
        if (sub.get_option("--eps")->count() == 0) a.eps = cfg.train.eps_clamp;
        if (sub.get_option("--seed")->count() == 0) a.seed = cfg.train.seed;
        a.hard_boundary = cfg.train.hard_boundary;
        if (a.ckpt.empty()) a.ckpt = (fs::path(cfg.out_dir) / "u.ckpt").string();
        f_ckpt = (fs::path(cfg.out_dir) / "f.ckpt").string();
    }
    if (a.m < 1 || a.m > std::numeric_limits<int>::max()) throw UsageError("--m must be a positive integer");
    const std::vector<double> x = parse_reals(a.point, "--point");
    if (static_cast<int>(x.size()) != a.dim) throw UsageError("--point must have exactly dim coordinates");
    for (double v : x)
        if (!std::isfinite(v) || std::abs(v) > 1e6) throw UsageError("--point coordinates out of range");

    EstimatorConfig cfg{a.dim, a.alpha, a.r0, a.eps, static_cast<int>(a.m)};
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    RngStream rng(a.seed, stream_id(StreamTag::estimate, 0));
    const std::span<const double> xs(x);

    json j;
    j["field"] = a.field;
    j["point"] = x;
    j["dim"] = a.dim;
    j["alpha"] = a.alpha;
    j["m"] = a.m;
    j["r0"] = a.r0;
    j["eps_clamp"] = a.eps;
    j["seed"] = a.seed;
    EstimateStats st;
    if (a.field == "exact") {
        st = mc_frac_laplacian_stats(ExactSolution{a.dim, a.alpha}, xs, cfg, rng);
    } else if (a.field == "zero") {
        st = mc_frac_laplacian_stats([](std::span<const double>) { return 0.0; }, xs, cfg, rng);
    } else if (a.field == "network") {
        if (a.ckpt.empty()) throw UsageError("--field network needs --ckpt or --config");
        const Checkpoint ck = checkpoint_load(a.ckpt);
        if (ck.params.input_dim() != a.dim) throw UsageError("checkpoint input width differs from --dim");
        const BoundaryMode mode = a.hard_boundary ? BoundaryMode::hard : BoundaryMode::soft;
        st = mc_frac_laplacian_stats(SolutionField{&ck.params, mode}, xs, cfg, rng);
        if (!f_ckpt.empty() && fs::exists(f_ckpt)) {
            const Checkpoint fk = checkpoint_load(f_ckpt);
            j["f_hat"] = mlp_forward(fk.params, xs);
        }
    } else {
        throw UsageError("--field must be one of exact, zero, network");
    }
    j["estimate"] = st.mean;
    j["std_error"] = std::isfinite(st.std_error) ? json(st.std_error) : json(nullptr);
    j["reference_f_star"] = exact_f(xs, a.dim, a.alpha);
    out << j.dump(2) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Inverse source reconstruction for the fractional Poisson equation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // run
    std::string run_config;
    std::vector<std::string> run_overrides;
    std::uint64_t run_seed = 0;
    int run_jobs = 1;
    bool run_quiet = false;
    auto* run_cmd = app.add_subcommand("run", "Train both networks and write trace, errors, checkpoints and grid");
    run_cmd->add_option("config", run_config, "Config file")->required();
    run_cmd->add_option("overrides", run_overrides, "key=value overrides");
    auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the config seed");
    run_cmd->add_option("--jobs", run_jobs, "Worker threads inside each step")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--quiet", run_quiet, "No progress output");

    // table
    std::string table_config, rows, deltas, row_kind = "alpha", table_out;
    std::vector<std::string> table_overrides;
    int seeds = 3, table_jobs = 1;
    auto* table_cmd = app.add_subcommand("table", "Train a grid of cells and write the relative-error table");
    table_cmd->add_option("config", table_config, "Config file")->required();
    table_cmd->add_option("overrides", table_overrides, "key=value overrides");
    table_cmd->add_option("--rows", rows, "Comma-separated alpha values or dimensions")->required();
    table_cmd->add_option("--deltas", deltas, "Comma-separated noise levels")->required();
    table_cmd->add_option("--row-kind", row_kind, "alpha or dim");
    table_cmd->add_option("--seeds", seeds, "Runs per cell (median reported)");
    table_cmd->add_option("--jobs", table_jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);
    table_cmd->add_option("--out", table_out, "Output CSV (default <out_dir>/table.csv)");

    // suggest
    double s_eps = 0.0, s_zeta = 0.5;
    int s_dim = 2;
    RateConstants constants;
    auto* suggest_cmd = app.add_subcommand("suggest", "Network size and sample count for a target accuracy");
    suggest_cmd->add_option("--eps", s_eps, "Target accuracy in (0, 1)")->required();
    suggest_cmd->add_option("--dim", s_dim, "Dimension")->required();
    suggest_cmd->add_option("--zeta", s_zeta, "Exponent slack in (0, 1)");
    suggest_cmd->add_option("--c-depth", constants.depth);
    suggest_cmd->add_option("--c-width", constants.width);
    suggest_cmd->add_option("--c-bound", constants.bound);
    suggest_cmd->add_option("--c-samples", constants.samples);

    // estimate
    EstimateArgs est;
    auto* estimate_cmd = app.add_subcommand("estimate", "Monte Carlo fractional Laplacian at one point");
    estimate_cmd->add_option("--config", est.config, "Config file; supplies defaults and checkpoint location");
    estimate_cmd->add_option("--point", est.point, "Comma-separated coordinates")->required();
    estimate_cmd->add_option("--field", est.field, "exact, zero or network");
    estimate_cmd->add_option("--ckpt", est.ckpt, "u-network checkpoint for --field network");
    estimate_cmd->add_option("--dim", est.dim);
    estimate_cmd->add_option("--alpha", est.alpha);
    estimate_cmd->add_option("--r0", est.r0);
    estimate_cmd->add_option("--eps", est.eps);
    estimate_cmd->add_option("--m", est.m, "Number of draws");
    estimate_cmd->add_option("--seed", est.seed);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_config, run_overrides, seed_opt, run_seed, run_jobs, run_quiet, out, err);
        if (table_cmd->parsed())
            return cmd_table(table_config, table_overrides, rows, deltas, row_kind, seeds, table_jobs, table_out, out, err);
        if (suggest_cmd->parsed()) return cmd_suggest(s_eps, s_dim, s_zeta, constants, out);
        if (estimate_cmd->parsed()) return cmd_estimate(est, *estimate_cmd, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kBadInput;
}

}  // namespace mcfpinn::cli
