#include "gfm_cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gfm/baselines.hpp"
#include "gfm/checkpoint.hpp"
#include "gfm/dataset_io.hpp"
#include "gfm/errors.hpp"
#include "gfm/eval.hpp"
#include "gfm/flow.hpp"
#include "gfm/serialize.hpp"
#include "gfm_cli/svg.hpp"

namespace gfm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kDataFile = "trajectories.gfmt";

// ---- small helpers ---------------------------------------------------------

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::uint64_t parse_u64(std::string_view text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw std::invalid_argument("not a non-negative integer: '" + std::string(text) + "'");
    }
    return v;
}

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw IoError("refusing to overwrite " + path.string() + " (pass --force)");
    }
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// <output filename>.resolved.json next to a single-file output
fs::path resolved_path(const fs::path& output) {
    fs::path p = output;
    p += ".resolved.json";
    return p;
}

json resolved_header(const std::string& command) {
    return json{{"tool", "gfm_lab"}, {"version", kVersion}, {"command", command}};
}

// ---- shared option groups --------------------------------------------------

struct GfmFlags {
    flow::GfmConfig cfg;
    std::string init = "xavier_normal";
    CLI::Option* n_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--beta", cfg.beta, "weight of the observed-prefix CFM term")->capture_default_str();
        app->add_option("--gamma", cfg.gamma, "weight of the extrapolation CFM term")->capture_default_str();
        app->add_option("--zeta", cfg.zeta, "weight of the midpoint consistency penalty")->capture_default_str();
        n_opt = app->add_option("--n", cfg.n, "last observed index")->capture_default_str();
        app->add_option("--m", cfg.m, "target index")->capture_default_str();
        app->add_option("--sigma", cfg.sigma, "std of Gaussian path noise")->capture_default_str();
        app->add_option("--lr", cfg.train_lr, "Adam learning rate for the vector field")->capture_default_str();
        app->add_option("--epochs", cfg.epochs)->capture_default_str();
        app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
        app->add_option("--seed", cfg.seed)->capture_default_str();
        app->add_flag("--per-sample-t", cfg.per_sample_t, "draw t per sample instead of per mini-batch");
        app->add_flag("--bridge-from-last", cfg.bridge_from_last_observed,
                      "extrapolation path runs from w_n instead of w_0");
        app->add_option("--prefix-decay", cfg.prefix_decay)->capture_default_str();
        app->add_option("--prefix-window", cfg.prefix_window)->capture_default_str();
        app->add_option("--init", init, "vector-field init: std_normal, xavier_uniform, xavier_normal")
            ->capture_default_str();
        app->add_option("--hidden", cfg.hidden, "hidden widths of the vector field")->delimiter(',');
    }

    flow::GfmConfig resolve() {
        cfg.init = nn::parse_init_scheme(init);
        cfg.validate();
        return cfg;
    }
};

struct ForecastFlags {
    flow::ForecastOptions opts;
    std::string integrator = "midpoint";

    void add(CLI::App* app) {
        app->add_option("--integrator", integrator, "midpoint or euler")->capture_default_str();
        app->add_option("--step", opts.h, "step in normalized time (0 = whole span / substeps)")->capture_default_str();
        app->add_option("--substeps", opts.default_substeps, "steps when --step is 0 (0 = 1 midpoint or 64 euler)")
            ->capture_default_str();
        app->add_option("--tau", opts.tau, "early-stop tolerance")->capture_default_str();
        app->add_option("--max-steps", opts.max_steps)->capture_default_str();
    }

    flow::ForecastOptions resolve() {
        opts.method = flow::parse_integrator(integrator);
        if (opts.h < 0.0 || !(opts.tau > 0.0)) throw std::invalid_argument("--step must be >= 0 and --tau > 0");
        return opts;
    }
};

struct SplitFlags {
    double train_fraction = 0.6;
    std::optional<std::uint64_t> split_seed;

    void add(CLI::App* app) {
        app->add_option("--train-fraction", train_fraction)->capture_default_str();
        app->add_option("--split-seed", split_seed, "defaults to the dataset seed");
    }

    eval::Split resolve(const traj::TrajectoryDataset& ds) const {
        return eval::split_indices(ds.count(), train_fraction, split_seed.value_or(ds.meta.seed));
    }
};

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
    std::string family = "linreg";
    std::vector<std::string> optimizers{"all"};
    std::string seeds = "0..4";
    std::size_t n_traj = 50;
    std::string init = "std_normal";
    double lr = 0.0;
    std::size_t steps = traj::kUpdateSteps;
    std::string activation = "relu";
    std::size_t batch_size = traj::kMlpBatchSize;
    std::string out;
    bool force = false;
};

void cmd_generate(const GenerateArgs& a, std::size_t jobs, std::ostream& out) {
    const auto family = traj::parse_family(a.family);
    const auto optimizers = parse_optimizer_list(a.optimizers);
    const auto seeds = parse_seed_list(a.seeds);
    const auto init = nn::parse_init_scheme(a.init);
    const auto activation = nn::parse_activation(a.activation);
    if (a.n_traj == 0) throw std::invalid_argument("--n-traj must be positive");

    std::vector<std::pair<optim::OptimizerKind, std::uint64_t>> jobs_list;
    for (auto opt : optimizers) {
        for (auto seed : seeds) {
            const fs::path dir = fs::path(a.out) / std::string(optim::to_string(opt)) / ("seed" + std::to_string(seed));
            if (!a.force && (fs::exists(dir / kDataFile) || fs::exists(dir / "resolved_config.json"))) {
                throw IoError("refusing to overwrite " + (dir / kDataFile).string() + " (pass --force)");
            }
            jobs_list.emplace_back(opt, seed);
        }
    }
    for (const auto& [opt, seed] : jobs_list) {
        const fs::path dir = fs::path(a.out) / std::string(optim::to_string(opt)) / ("seed" + std::to_string(seed));
        auto ocfg = optim::default_config(opt);
        if (a.lr > 0.0) ocfg.lr = a.lr;
        traj::GenerationOptions gen{a.steps, jobs};
        traj::TrajectoryDataset ds = family == traj::TaskFamily::linreg
            ? traj::generate_linreg_trajectories(ocfg, a.n_traj, seed, init, gen)
            : traj::generate_mlp_trajectories(traj::default_mlp_mix(activation), ocfg, seed, init, a.batch_size, gen);
        ensure_writable(dir / kDataFile, true);
        io::save_dataset(ds, dir / kDataFile);

        json resolved = resolved_header("generate");
        resolved["family"] = a.family;
        resolved["optimizer"] = json::parse(to_json_text(ocfg));
        resolved["seed"] = seed;
        resolved["n_traj"] = ds.count();
        resolved["init"] = a.init;
        resolved["steps"] = a.steps;
        if (family == traj::TaskFamily::mlp) {
            resolved["activation"] = a.activation;
            resolved["batch_size"] = a.batch_size;
        }
        resolved["output"] = kDataFile;
        resolved["shape"] = {ds.count(), ds.length(), ds.dim()};
        write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
        out << (dir / kDataFile).string() << "  (" << ds.count() << ", " << ds.length() << ", " << ds.dim() << ")\n";
    }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string model = "gfm";
    bool all_rows = false;
    bool force = false;
    double baseline_lr = 1e-4;
    std::size_t baseline_epochs = 1000;
    std::size_t baseline_batch = 16;
};

void cmd_train(const TrainArgs& a, GfmFlags& gf, const SplitFlags& sf, std::ostream& out) {
    const auto model = eval::parse_model(a.model);
    const flow::GfmConfig cfg = gf.resolve();
    const fs::path out_path(a.out);
    ensure_writable(out_path, a.force);
    ensure_writable(resolved_path(out_path), a.force);
    const auto ds = io::load_dataset(a.data);

    std::vector<std::size_t> rows;
    if (a.all_rows) {
        rows.resize(ds.count());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    } else {
        rows = sf.resolve(ds).train;
    }
    const auto views = ds.views(rows);

    json resolved = resolved_header("train");
    resolved["data"] = a.data;
    resolved["model"] = a.model;
    resolved["train_rows"] = rows;
    resolved["train_fraction"] = a.all_rows ? 1.0 : sf.train_fraction;
    resolved["split_seed"] = sf.split_seed.value_or(ds.meta.seed);
    resolved["output"] = out_path.filename().string();

    double final_loss = 0.0;
    if (model == eval::ModelKind::gfm) {
        auto result = flow::train(views, cfg);
        final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
        io::save_checkpoint(io::GfmCheckpoint{std::move(result.net), cfg, std::move(result.loss_curve)}, out_path);
        resolved["gfm"] = json::parse(to_json_text(cfg));
    } else {
        baselines::BaselineConfig bcfg{a.baseline_lr, a.baseline_epochs, a.baseline_batch, cfg.seed};
        const auto fitted = baselines::fit_baseline(baselines::parse_baseline(a.model), views, cfg.n, cfg.m, bcfg);
        final_loss = fitted.loss_curve.empty() ? 0.0 : fitted.loss_curve.back();
        io::save_checkpoint(fitted, out_path);
        resolved["baseline"] = {{"lr", bcfg.lr}, {"epochs", bcfg.epochs}, {"batch_size", bcfg.batch_size},
                                {"seed", bcfg.seed}, {"n", cfg.n}, {"m", cfg.m}};
    }
    resolved["final_loss"] = final_loss;
    write_text(resolved_path(out_path), resolved.dump(2) + "\n");
    out << "trained " << a.model << " on " << rows.size() << " trajectories, final loss " << short_num(final_loss)
        << "\nwrote " << out_path.string() << "\n";
}

// ---- forecast --------------------------------------------------------------

struct ForecastArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string rows = "test";
    bool force = false;
};

void cmd_forecast(const ForecastArgs& a, GfmFlags& gf, ForecastFlags& ff, const SplitFlags& sf,
                  std::ostream& out) {
    const fs::path out_path(a.out);
    ensure_writable(out_path, a.force);
    ensure_writable(resolved_path(out_path), a.force);
    const auto ds = io::load_dataset(a.data);
    const auto fopts = ff.resolve();
    const auto split = sf.resolve(ds);

    std::vector<std::pair<std::size_t, std::string>> rows;
    if (a.rows == "test" || a.rows == "all") {
        for (auto i : split.test) rows.emplace_back(i, "test");
    }
    if (a.rows == "train" || a.rows == "all") {
        for (auto i : split.train) rows.emplace_back(i, "train");
    }
    if (rows.empty()) throw std::invalid_argument("--rows must be test, train or all");
    std::sort(rows.begin(), rows.end());

    json resolved = resolved_header("forecast");
    resolved["data"] = a.data;
    resolved["rows"] = a.rows;
    resolved["train_fraction"] = sf.train_fraction;
    resolved["split_seed"] = sf.split_seed.value_or(ds.meta.seed);
    resolved["output"] = out_path.filename().string();

    std::string kind = "gfm";
    std::optional<io::GfmCheckpoint> gfm;
    std::optional<baselines::BaselineModel> base;
    if (!a.checkpoint.empty()) {
        kind = io::checkpoint_kind(a.checkpoint);
        resolved["checkpoint"] = a.checkpoint;
        if (kind == "gfm") {
            gfm = io::load_gfm_checkpoint(a.checkpoint);
            if (gf.n_opt->count() > 0 && gf.cfg.n != gfm->config.n) {
                throw std::invalid_argument("--n " + std::to_string(gf.cfg.n) + " disagrees with the checkpoint (n = " +
                                            std::to_string(gfm->config.n) + ")");
            }
        } else {
            base = io::load_baseline_checkpoint(a.checkpoint);
        }
    } else {
        const auto cfg = gf.resolve();
        auto result = flow::train(ds.views(split.train), cfg);
        gfm = io::GfmCheckpoint{std::move(result.net), cfg, std::move(result.loss_curve)};
        resolved["trained_rows"] = split.train;
    }
    if (gfm) {
        resolved["gfm"] = json::parse(to_json_text(gfm->config));
        resolved["forecast"] = json::parse(to_json_text(fopts));
    }
    resolved["model"] = kind;

    const std::size_t d = ds.dim();
    const std::size_t n = gfm ? gfm->config.n : base->n;
    const std::size_t m = gfm ? gfm->config.m : base->m;
    if (m >= ds.length()) throw ShapeError("dataset has no row m = " + std::to_string(m));

    std::string csv = "trajectory,split,steps,t_end,early_stopped,mse";
    for (std::size_t i = 0; i < d; ++i) csv += ",pred_" + std::to_string(i);
    for (std::size_t i = 0; i < d; ++i) csv += ",true_" + std::to_string(i);
    csv += "\n";
    double total = 0.0;
    for (const auto& [idx, side] : rows) {
        const auto traj = ds.view(idx);
        flow::ForecastTrace trace;
        if (gfm) {
            if (gfm->net.dim() != d) throw ShapeError("checkpoint dimension does not match the dataset");
            trace = flow::integrate(gfm->net, traj.row(n), gfm->config.t_start(), fopts);
        } else {
            trace.w = baselines::predict_baseline(*base, traj);
            trace.t_end = 1.0;
        }
        const double err = eval::mse(trace.w, traj.row(m));
        total += err;
        csv += std::to_string(idx) + "," + side + "," + std::to_string(trace.steps) + "," + num(trace.t_end) + "," +
               (trace.early_stopped ? "1" : "0") + "," + num(err);
        for (double v : trace.w) csv += "," + num(v);
        for (double v : traj.row(m)) csv += "," + num(v);
        csv += "\n";
    }
    write_text(out_path, csv);
    write_text(resolved_path(out_path), resolved.dump(2) + "\n");
    out << "forecast " << rows.size() << " trajectories from n = " << n << " to m = " << m << ", mean mse "
        << short_num(total / static_cast<double>(rows.size())) << "\nwrote " << out_path.string() << "\n";
}

// ---- eval / sweep ----------------------------------------------------------

struct EvalArgs {
    std::string suite = "main";
    std::vector<std::string> models;
    std::vector<std::string> optimizers;
    std::string seeds = "0..4";
    std::size_t n_traj = 50;
    std::optional<std::size_t> baseline_epochs;
    std::string data_init = "std_normal";
    std::string out;
    bool force = false;
    std::vector<double> betas;
    std::vector<double> gammas;
    std::vector<double> zetas;
};

void print_results(const eval::Report& report, std::ostream& out) {
    out << std::left << std::setw(14) << "model" << std::setw(10) << "optimizer" << std::setw(22)
        << "beta/gamma/zeta" << "mean (std)\n";
    for (const auto& r : report.results) {
        std::ostringstream grid;
        grid << r.beta << "/" << r.gamma << "/" << r.zeta;
        out << std::left << std::setw(14) << eval::to_string(r.model) << std::setw(10)
            << optim::to_string(r.optimizer) << std::setw(22) << grid.str() << short_num(r.mean) << " ("
            << short_num(r.std) << ")" << (r.best ? "  *best" : "") << "\n";
    }
}

void write_report(const eval::Report& report, const fs::path& dir, const std::string& command,
                  const std::string& suite, bool force) {
    for (const char* f : {"cells.csv", "results.csv", "summary.json", "resolved_config.json"}) {
        ensure_writable(dir / f, force);
    }
    write_text(dir / "cells.csv", eval::cells_csv(report));
    write_text(dir / "results.csv", eval::results_csv(report));
    write_text(dir / "summary.json", eval::report_json(report));
    json resolved = resolved_header(command);
    resolved["suite"] = suite;
    resolved["experiment"] = json::parse(eval::config_json(report.config));
    resolved["outputs"] = {"cells.csv", "results.csv", "summary.json"};
    write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
}

eval::ExperimentConfig experiment_from(const EvalArgs& a, GfmFlags& gf, ForecastFlags& ff, std::size_t jobs) {
    eval::ExperimentConfig cfg;
    if (!a.models.empty()) {
        cfg.models.clear();
        for (const auto& m : a.models) cfg.models.push_back(eval::parse_model(m));
    }
    if (!a.optimizers.empty()) cfg.optimizers = parse_optimizer_list(a.optimizers);
    cfg.seeds = parse_seed_list(a.seeds);
    cfg.n_traj = a.n_traj;
    cfg.data_init = nn::parse_init_scheme(a.data_init);
    cfg.gfm = gf.resolve();
    cfg.forecast = ff.resolve();
    cfg.baseline.epochs = a.baseline_epochs.value_or(cfg.gfm.epochs);
    cfg.jobs = jobs;
    cfg.validate();
    return cfg;
}

void cmd_eval(const EvalArgs& a, GfmFlags& gf, ForecastFlags& ff, std::size_t jobs, std::ostream& out) {
    const fs::path dir(a.out);
    if (a.suite == "mlp") {
        eval::GeneralizationConfig g;
        if (!a.optimizers.empty()) g.optimizers = parse_optimizer_list(a.optimizers);
        g.seeds = parse_seed_list(a.seeds);
        g.gfm = gf.resolve();
        g.forecast = ff.resolve();
        g.jobs = jobs;
        for (const char* f : {"generalization.csv", "resolved_config.json"}) ensure_writable(dir / f, a.force);
        const auto results = eval::run_generalization(g);
        write_text(dir / "generalization.csv", eval::generalization_csv(results));
        json resolved = resolved_header("eval");
        resolved["suite"] = "mlp";
        resolved["experiment"] = json::parse(eval::generalization_config_json(g));
        resolved["outputs"] = {"generalization.csv"};
        write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
        for (const auto& r : results) {
            out << std::left << std::setw(10) << optim::to_string(r.optimizer) << "seed " << r.seed
                << "  median f_source " << short_num(r.median_f_source) << "  median recorded final loss "
                << short_num(r.median_recorded_final) << "\n";
        }
        return;
    }

    auto cfg = experiment_from(a, gf, ff, jobs);
    if (a.suite == "main" || a.suite == "table1") {
        const auto report = eval::run_experiment(cfg);
        write_report(report, dir, "eval", a.suite, a.force);
        print_results(report, out);
    } else if (a.suite == "best") {
        const auto report = eval::run_best_configs(cfg);
        write_report(report, dir, "eval", a.suite, a.force);
        print_results(report, out);
    } else if (a.suite == "n0") {
        cfg.models = {eval::ModelKind::gfm};
        cfg.gfm.n = 0;
        const auto report = eval::run_experiment(cfg);
        write_report(report, dir, "eval", a.suite, a.force);
        print_results(report, out);
    } else if (a.suite == "xavier") {
        cfg.models = {eval::ModelKind::gfm};
        for (auto init : {nn::InitScheme::std_normal, nn::InitScheme::xavier_uniform, nn::InitScheme::xavier_normal}) {
            cfg.data_init = init;
            const auto report = eval::run_experiment(cfg);
            write_report(report, dir / std::string(nn::to_string(init)), "eval", a.suite, a.force);
            out << "data init " << nn::to_string(init) << "\n";
            print_results(report, out);
        }
    } else {
        throw std::invalid_argument("unknown suite '" + a.suite + "' (main, best, n0, xavier, mlp)");
    }
}

void cmd_sweep(const EvalArgs& a, GfmFlags& gf, ForecastFlags& ff, std::size_t jobs, std::ostream& out) {
    if (a.suite != "full" && a.suite != "appendixE" && a.suite != "custom") {
        throw std::invalid_argument("unknown sweep suite '" + a.suite + "' (full, custom)");
    }
    auto cfg = experiment_from(a, gf, ff, jobs);
    eval::SweepGrid grid = eval::SweepGrid::full();
    if (!a.betas.empty()) grid.betas = a.betas;
    if (!a.gammas.empty()) grid.gammas = a.gammas;
    if (!a.zetas.empty()) grid.zetas = a.zetas;
    const auto report = eval::sensitivity_sweep(grid, cfg);
    write_report(report, fs::path(a.out), "sweep", a.suite, a.force);
    print_results(report, out);
}

// ---- plot ------------------------------------------------------------------

struct PlotArgs {
    std::string data;
    std::string forecast;
    std::string out;
    std::size_t max_traj = 0;
    std::string title;
    bool force = false;
};

std::map<std::size_t, std::vector<double>> read_forecast_csv(const fs::path& path, std::size_t dim) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty forecast file", 0);
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    const auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError(path.string() + ": missing column " + name, 0);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t traj_col = col("trajectory");
    std::vector<std::size_t> pred_cols;
    for (std::size_t i = 0; i < dim; ++i) pred_cols.push_back(col("pred_" + std::to_string(i)));

    std::map<std::size_t, std::vector<double>> out;
    std::size_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size()) throw FormatError(path.string() + ": ragged row", offset);
        std::vector<double> w;
        for (auto c : pred_cols) {
            try {
                w.push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad number '" + cells[c] + "'", offset);
            }
        }
        out[parse_u64(cells[traj_col])] = std::move(w);
        offset += line.size() + 1;
    }
    return out;
}

void cmd_plot(const PlotArgs& a, std::ostream& out) {
    const fs::path out_path(a.out);
    ensure_writable(out_path, a.force);
    ensure_writable(resolved_path(out_path), a.force);
    const auto ds = io::load_dataset(a.data);
    std::map<std::size_t, std::vector<double>> forecasts;
    if (!a.forecast.empty()) forecasts = read_forecast_csv(a.forecast, ds.dim());
    PlotOptions opts;
    opts.title = a.title;
    opts.max_trajectories = a.max_traj;
    const std::string svg = trajectory_svg(ds, forecasts, opts);
    write_text(out_path, svg);
    json resolved = resolved_header("plot");
    resolved["data"] = a.data;
    resolved["forecast"] = a.forecast;
    resolved["max_traj"] = a.max_traj;
    resolved["title"] = a.title;
    resolved["projection"] = ds.dim() > 2 ? "pca" : "raw";
    resolved["output"] = out_path.filename().string();
    write_text(resolved_path(out_path), resolved.dump(2) + "\n");
    out << "wrote " << out_path.string() << "\n";
}

int report_error(std::ostream& err, const std::string& what, int code) {
    err << "gfm_lab: " << what << "\n";
    return code;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    if (const auto dots = text.find(".."); dots != std::string_view::npos) {
        const auto lo = parse_u64(text.substr(0, dots));
        const auto hi = parse_u64(text.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("empty seed range '" + std::string(text) + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        seeds.push_back(parse_u64(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return seeds;
}

std::vector<optim::OptimizerKind> parse_optimizer_list(const std::vector<std::string>& names) {
    std::vector<optim::OptimizerKind> out;
    for (const auto& name : names) {
        if (name == "all") {
            out.insert(out.end(), std::begin(optim::kTrajectoryOptimizers), std::end(optim::kTrajectoryOptimizers));
        } else {
            out.push_back(optim::parse_optimizer(name));
        }
    }
    if (out.empty()) throw std::invalid_argument("no optimizers selected");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gradient flow matching lab: generate weight trajectories, train and evaluate forecasters",
                 "gfm_lab"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::size_t jobs = 1;
    app.add_option("--jobs,-j", jobs, "worker threads")->envname("GFM_LAB_JOBS")->capture_default_str();

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "train task models and record weight trajectories");
    g->add_option("--family", gen.family, "linreg or mlp")->capture_default_str();
    g->add_option("--optimizer", gen.optimizers, "optimizer names or 'all'")->delimiter(',');
    g->add_option("--seeds", gen.seeds, "e.g. 0..4 or 0,2")->capture_default_str();
    g->add_option("--n-traj", gen.n_traj, "trajectories per dataset (linreg)")->capture_default_str();
    g->add_option("--init", gen.init, "task model init")->capture_default_str();
    g->add_option("--lr", gen.lr, "override the optimizer learning rate")->capture_default_str();
    g->add_option("--steps", gen.steps, "updates (linreg) or epochs (mlp)")->capture_default_str();
    g->add_option("--activation", gen.activation, "task MLP activation")->capture_default_str();
    g->add_option("--batch-size", gen.batch_size, "task MLP mini-batch")->capture_default_str();
    g->add_option("--out", gen.out, "output root")->required();
    g->add_flag("--force", gen.force, "overwrite existing files");

    TrainArgs tr;
    GfmFlags tr_gfm;
    SplitFlags tr_split;
    auto* t = app.add_subcommand("train", "fit a vector field (or a baseline) on a dataset");
    t->add_option("--data", tr.data, "GFMT dataset")->required();
    t->add_option("--out", tr.out, "checkpoint path")->required();
    t->add_option("--model", tr.model, "gfm, lfd2, introspection or dlinear")->capture_default_str();
    t->add_flag("--all", tr.all_rows, "train on every trajectory instead of the training split");
    t->add_option("--baseline-lr", tr.baseline_lr)->capture_default_str();
    t->add_option("--baseline-epochs", tr.baseline_epochs)->capture_default_str();
    t->add_option("--baseline-batch-size", tr.baseline_batch)->capture_default_str();
    t->add_flag("--force", tr.force, "overwrite existing files");
    tr_gfm.add(t);
    tr_split.add(t);

    ForecastArgs fc;
    GfmFlags fc_gfm;
    ForecastFlags fc_opts;
    SplitFlags fc_split;
    auto* f = app.add_subcommand("forecast", "forecast final weights from observed prefixes");
    f->add_option("--checkpoint", fc.checkpoint, "trained model; without it a vector field is trained first");
    f->add_option("--data", fc.data, "GFMT dataset")->required();
    f->add_option("--out", fc.out, "forecast CSV")->required();
    f->add_option("--rows", fc.rows, "test, train or all")->capture_default_str();
    f->add_flag("--force", fc.force, "overwrite existing files");
    fc_gfm.add(f);
    fc_opts.add(f);
    fc_split.add(f);

    EvalArgs ev;
    GfmFlags ev_gfm;
    ForecastFlags ev_opts;
    auto* e = app.add_subcommand("eval", "seed-repeated experiment suites");
    e->add_option("--suite", ev.suite, "main, best, n0, xavier or mlp")->capture_default_str();
    e->add_option("--models", ev.models, "gfm, lfd2, introspection, dlinear")->delimiter(',');
    e->add_option("--optimizers", ev.optimizers, "optimizer names or 'all'")->delimiter(',');
    e->add_option("--seeds", ev.seeds)->capture_default_str();
    e->add_option("--n-traj", ev.n_traj)->capture_default_str();
    e->add_option("--baseline-epochs", ev.baseline_epochs, "defaults to --epochs");
    e->add_option("--data-init", ev.data_init, "task model init for generated data")->capture_default_str();
    e->add_option("--out", ev.out, "output directory")->required();
    e->add_flag("--force", ev.force, "overwrite existing files");
    ev_gfm.add(e);
    ev_opts.add(e);

    EvalArgs sw;
    sw.suite = "full";
    GfmFlags sw_gfm;
    ForecastFlags sw_opts;
    auto* s = app.add_subcommand("sweep", "beta x gamma x zeta sensitivity grid");
    s->add_option("--suite", sw.suite, "full (4 x 4 x 4) or custom")->capture_default_str();
    s->add_option("--betas", sw.betas)->delimiter(',');
    s->add_option("--gammas", sw.gammas)->delimiter(',');
    s->add_option("--zetas", sw.zetas)->delimiter(',');
    s->add_option("--optimizers", sw.optimizers, "optimizer names or 'all'")->delimiter(',');
    s->add_option("--seeds", sw.seeds)->capture_default_str();
    s->add_option("--n-traj", sw.n_traj)->capture_default_str();
    s->add_option("--data-init", sw.data_init)->capture_default_str();
    s->add_option("--out", sw.out, "output directory")->required();
    s->add_flag("--force", sw.force, "overwrite existing files");
    sw_gfm.add(s);
    sw_opts.add(s);

    PlotArgs pl;
    auto* p = app.add_subcommand("plot", "static SVG of trajectories and forecasts");
    p->add_option("--data", pl.data, "GFMT dataset")->required();
    p->add_option("--forecast", pl.forecast, "forecast CSV to overlay");
    p->add_option("--out", pl.out, "SVG path")->required();
    p->add_option("--max-traj", pl.max_traj, "plot only the first k trajectories (0 = all)")->capture_default_str();
    p->add_option("--title", pl.title);
    p->add_flag("--force", pl.force, "overwrite existing files");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitIo;
    }
    if (jobs == 0) jobs = 1;

    try {
        if (g->parsed()) cmd_generate(gen, jobs, out);
        else if (t->parsed()) cmd_train(tr, tr_gfm, tr_split, out);
        else if (f->parsed()) cmd_forecast(fc, fc_gfm, fc_opts, fc_split, out);
        else if (e->parsed()) cmd_eval(ev, ev_gfm, ev_opts, jobs, out);
        else if (s->parsed()) cmd_sweep(sw, sw_gfm, sw_opts, jobs, out);
        else if (p->parsed()) cmd_plot(pl, out);
    } catch (const FormatError& ex) {
        return report_error(err, ex.what(), kExitIo);
    } catch (const IoError& ex) {
        return report_error(err, ex.what(), kExitIo);
    } catch (const fs::filesystem_error& ex) {
        return report_error(err, ex.what(), kExitIo);
    } catch (const NumericError& ex) {
        return report_error(err, ex.what(), kExitModel);
    } catch (const ShapeError& ex) {
        return report_error(err, ex.what(), kExitModel);
    } catch (const std::invalid_argument& ex) {
        return report_error(err, ex.what(), kExitIo);
    } catch (const std::exception& ex) {
        return report_error(err, ex.what(), kExitModel);
    }
    return kExitOk;
}

}  // namespace gfm::cli
