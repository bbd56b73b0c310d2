#include "gfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "gfm/errors.hpp"
#include "gfm/parallel.hpp"
#include "gfm/rng.hpp"
#include "json_codec.hpp"

namespace gfm::eval {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string cell_label(ModelKind model, optim::OptimizerKind opt, std::uint64_t seed,
                       const flow::GfmConfig& g) {
    std::ostringstream s;
    s << to_string(model) << "/" << optim::to_string(opt) << "/seed " << seed;
    if (model == ModelKind::gfm) s << " (beta " << g.beta << ", gamma " << g.gamma << ", zeta " << g.zeta << ")";
    return s.str();
}

std::vector<double> forecast_one(const ExperimentConfig& cfg, ModelKind model,
                                 const flow::VectorFieldNet* net, const baselines::BaselineModel* base,
                                 const flow::GfmConfig& g, const traj::TrajectoryView& traj) {
    if (model == ModelKind::gfm) return flow::forecast(*net, traj.row(g.n), g, cfg.forecast);
    return baselines::predict_baseline(*base, traj);
}

// Aggregates cells sharing (model, optimizer, beta, gamma, zeta) in cell order.
std::vector<ExperimentResult> aggregate(const std::vector<CellResult>& cells) {
    std::vector<ExperimentResult> out;
    for (const auto& c : cells) {
        auto it = std::find_if(out.begin(), out.end(), [&](const ExperimentResult& r) {
            return r.model == c.model && r.optimizer == c.optimizer && r.beta == c.gfm.beta &&
                   r.gamma == c.gfm.gamma && r.zeta == c.gfm.zeta;
        });
        if (it == out.end()) {
            ExperimentResult r;
            r.model = c.model;
            r.optimizer = c.optimizer;
            r.beta = c.gfm.beta;
            r.gamma = c.gfm.gamma;
            r.zeta = c.gfm.zeta;
            out.push_back(r);
            it = out.end() - 1;
        }
        it->seeds.push_back(c.seed);
        it->per_seed_mse.push_back(c.test_mse);
        it->per_seed_f_source.push_back(c.f_source);
    }
    for (auto& r : out) {
        r.mean = mean(r.per_seed_mse);
        r.std = sample_std(r.per_seed_mse);
    }
    return out;
}

using DatasetKey = std::pair<optim::OptimizerKind, std::uint64_t>;

std::map<DatasetKey, traj::TrajectoryDataset> build_datasets(const ExperimentConfig& cfg) {
    std::vector<DatasetKey> keys;
    for (auto opt : cfg.optimizers) {
        for (auto seed : cfg.seeds) keys.emplace_back(opt, seed);
    }
    std::vector<traj::TrajectoryDataset> built(keys.size());
    parallel_for(keys.size(), cfg.jobs, [&](std::size_t i) {
        built[i] = experiment_dataset(cfg, keys[i].first, keys[i].second);
    });
    std::map<DatasetKey, traj::TrajectoryDataset> out;
    for (std::size_t i = 0; i < keys.size(); ++i) out.emplace(keys[i], std::move(built[i]));
    return out;
}

struct CellSpec {
    ModelKind model;
    optim::OptimizerKind optimizer;
    std::uint64_t seed;
    flow::GfmConfig gfm;
};

std::vector<CellResult> run_cells(const ExperimentConfig& cfg, const std::vector<CellSpec>& specs) {
    const auto datasets = build_datasets(cfg);
    std::vector<CellResult> cells(specs.size());
    parallel_for(specs.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = specs[i];
        cells[i] = run_cell(cfg, datasets.at({s.optimizer, s.seed}), s.model, s.optimizer, s.seed, s.gfm);
    });
    return cells;
}

detail::json baseline_config_json(const baselines::BaselineConfig& b) {
    return {{"lr", b.lr}, {"epochs", b.epochs}, {"batch_size", b.batch_size}, {"seed", b.seed}};
}

detail::json results_json(const std::vector<ExperimentResult>& results) {
    detail::json arr = detail::json::array();
    for (const auto& r : results) {
        arr.push_back({{"model", std::string(to_string(r.model))},
                       {"optimizer", std::string(optim::to_string(r.optimizer))},
                       {"beta", r.beta},
                       {"gamma", r.gamma},
                       {"zeta", r.zeta},
                       {"seeds", r.seeds},
                       {"per_seed_mse", r.per_seed_mse},
                       {"per_seed_f_source", r.per_seed_f_source},
                       {"mean", r.mean},
                       {"std", r.std},
                       {"best", r.best}});
    }
    return arr;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::gfm: return "gfm";
        case ModelKind::lfd2: return "lfd2";
        case ModelKind::introspection: return "introspection";
        case ModelKind::dlinear: return "dlinear";
    }
    return "unknown";
}

ModelKind parse_model(std::string_view name) {
    if (name == "gfm") return ModelKind::gfm;
    if (name == "lfd2") return ModelKind::lfd2;
    if (name == "introspection") return ModelKind::introspection;
    if (name == "dlinear") return ModelKind::dlinear;
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(count) * train_fraction));
    if (n_train == 0 || n_train >= count) {
        throw std::invalid_argument("split of " + std::to_string(count) + " trajectories leaves one side empty");
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(order.begin(), order.end());
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

std::pair<traj::TrajectoryDataset, traj::TrajectoryDataset>
split_dataset(const traj::TrajectoryDataset& ds, double train_fraction, std::uint64_t seed) {
    const Split s = split_indices(ds.count(), train_fraction, seed);
    return {ds.subset(s.train), ds.subset(s.test)};
}

double mse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("mse: length mismatch");
    if (pred.empty()) throw ShapeError("mse: empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

double f_source(const nn::NetSpec& spec, std::span<const double> params, const traj::RegressionTask& task) {
    if (params.size() != nn::param_count(spec)) throw ShapeError("f_source: parameters do not match the spec");
    return traj::task_loss(spec, params, task);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of an empty list");
    std::sort(xs.begin(), xs.end());
    const std::size_t h = xs.size() / 2;
    return xs.size() % 2 == 1 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

void ExperimentConfig::validate() const {
    if (models.empty() || optimizers.empty() || seeds.empty()) {
        throw std::invalid_argument("experiment needs at least one model, optimizer and seed");
    }
    if (n_traj < 2) throw std::invalid_argument("experiment needs at least two trajectories");
    gfm.validate();
    baseline.validate();
    split_indices(n_traj, train_fraction, 0);
}

traj::TrajectoryDataset experiment_dataset(const ExperimentConfig& cfg, optim::OptimizerKind optimizer,
                                           std::uint64_t seed) {
    traj::GenerationOptions gen;
    gen.steps = std::max<std::size_t>(traj::kUpdateSteps, cfg.gfm.m);
    return traj::generate_linreg_trajectories(optim::default_config(optimizer), cfg.n_traj, seed,
                                              cfg.data_init, gen);
}

CellResult run_cell(const ExperimentConfig& cfg, const traj::TrajectoryDataset& ds, ModelKind model,
                    optim::OptimizerKind optimizer, std::uint64_t seed, const flow::GfmConfig& gfm) {
    CellResult cell{model, optimizer, seed, gfm, 0.0, 0.0};
    cell.gfm.seed = seed;
    try {
        const Split split = split_indices(ds.count(), cfg.train_fraction, seed);
        const auto train_views = ds.views(split.train);

        flow::VectorFieldNet net;
        baselines::BaselineModel base;
        if (model == ModelKind::gfm) {
            net = flow::train(train_views, cell.gfm).net;
        } else {
            auto bcfg = cfg.baseline;
            bcfg.seed = seed;
            const auto kind = baselines::parse_baseline(to_string(model));
            base = baselines::fit_baseline(kind, train_views, cell.gfm.n, cell.gfm.m, bcfg);
        }

        double total_mse = 0.0;
        double total_fs = 0.0;
        for (std::size_t idx : split.test) {
            const auto traj = ds.view(idx);
            const auto pred = forecast_one(cfg, model, &net, &base, cell.gfm, traj);
            total_mse += mse(pred, traj.row(cell.gfm.m));
            total_fs += f_source(traj::spec_for_trajectory(ds.meta, idx), pred,
                                 traj::task_for_trajectory(ds.meta, idx));
        }
        const auto count = static_cast<double>(split.test.size());
        cell.test_mse = total_mse / count;
        cell.f_source = total_fs / count;
    } catch (const NumericError& e) {
        throw NumericError(cell_label(model, optimizer, seed, cell.gfm) + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(cell_label(model, optimizer, seed, cell.gfm) + ": " + e.what());
    }
    return cell;
}

CellResult run_cell(const ExperimentConfig& cfg, ModelKind model, optim::OptimizerKind optimizer,
                    std::uint64_t seed) {
    return run_cell(cfg, experiment_dataset(cfg, optimizer, seed), model, optimizer, seed, cfg.gfm);
}

Report run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<CellSpec> specs;
    for (auto model : cfg.models) {
        for (auto opt : cfg.optimizers) {
            for (auto seed : cfg.seeds) specs.push_back({model, opt, seed, cfg.gfm});
        }
    }
    Report report{cfg, run_cells(cfg, specs), {}};
    report.results = aggregate(report.cells);
    return report;
}

flow::GfmConfig best_config(optim::OptimizerKind kind, const flow::GfmConfig& base) {
    using optim::OptimizerKind;
    flow::GfmConfig g = base;
    switch (kind) {
        case OptimizerKind::sgd: g.beta = 0.0; g.gamma = 0.0; g.zeta = 10.0; break;
        case OptimizerKind::adam: g.beta = 0.0; g.gamma = 0.1; g.zeta = 1.0; break;
        case OptimizerKind::adamw: g.beta = 0.0; g.gamma = 1.0; g.zeta = 100.0; break;
        case OptimizerKind::rmsprop: g.beta = 0.1; g.gamma = 1.0; g.zeta = 100.0; break;
        case OptimizerKind::adagrad: g.beta = 0.1; g.gamma = 1.0; g.zeta = 100.0; break;
        default: throw std::invalid_argument("no reference configuration for optimizer " +
                                             std::string(optim::to_string(kind)));
    }
    return g;
}

Report run_best_configs(const ExperimentConfig& cfg) {
    ExperimentConfig base = cfg;
    base.models = {ModelKind::gfm};
    base.validate();
    std::vector<CellSpec> specs;
    for (auto opt : base.optimizers) {
        const auto g = best_config(opt, base.gfm);
        for (auto seed : base.seeds) specs.push_back({ModelKind::gfm, opt, seed, g});
    }
    Report report{base, run_cells(base, specs), {}};
    report.results = aggregate(report.cells);
    return report;
}

SweepGrid SweepGrid::full() {
    return {{0.0, 0.1, 1.0, 10.0}, {0.0, 0.1, 1.0, 10.0}, {0.0, 1.0, 10.0, 100.0}};
}

Report sensitivity_sweep(const SweepGrid& grid, const ExperimentConfig& cfg) {
    if (grid.size() == 0) throw std::invalid_argument("sweep grid is empty");
    ExperimentConfig base = cfg;
    base.models = {ModelKind::gfm};
    base.validate();
    std::vector<CellSpec> specs;
    for (double beta : grid.betas) {
        for (double gamma : grid.gammas) {
            for (double zeta : grid.zetas) {
                flow::GfmConfig g = base.gfm;
                g.beta = beta;
                g.gamma = gamma;
                g.zeta = zeta;
                g.validate();
                for (auto opt : base.optimizers) {
                    for (auto seed : base.seeds) specs.push_back({ModelKind::gfm, opt, seed, g});
                }
            }
        }
    }
    Report report{base, run_cells(base, specs), {}};
    report.results = aggregate(report.cells);
    for (auto opt : base.optimizers) {
        ExperimentResult* best = nullptr;
        for (auto& r : report.results) {
            if (r.optimizer == opt && (best == nullptr || r.mean < best->mean)) best = &r;
        }
        if (best != nullptr) best->best = true;
    }
    return report;
}

std::vector<GeneralizationResult> run_generalization(const GeneralizationConfig& cfg) {
    cfg.gfm.validate();
    std::vector<DatasetKey> keys;
    for (auto opt : cfg.optimizers) {
        for (auto seed : cfg.seeds) keys.emplace_back(opt, seed);
    }
    std::vector<GeneralizationResult> out(keys.size());
    parallel_for(keys.size(), cfg.jobs, [&](std::size_t i) {
        const auto [opt, seed] = keys[i];
        auto ocfg = optim::default_config(opt);
        if (cfg.lr > 0.0) ocfg.lr = cfg.lr;
        traj::GenerationOptions gen;
        gen.steps = std::max<std::size_t>(traj::kUpdateSteps, cfg.gfm.m);
        const auto ds = traj::generate_mlp_trajectories(traj::default_mlp_mix(cfg.activation), ocfg, seed,
                                                        nn::InitScheme::std_normal, traj::kMlpBatchSize, gen);
        if (cfg.train_rows == 0 || cfg.train_rows >= ds.count()) {
            throw std::invalid_argument("generalization split needs rows on both sides");
        }
        std::vector<std::size_t> train_rows(cfg.train_rows);
        std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
        flow::GfmConfig g = cfg.gfm;
        g.seed = seed;
        const auto net = flow::train(ds.views(train_rows), g).net;

        GeneralizationResult r;
        r.optimizer = opt;
        r.seed = seed;
        for (std::size_t idx = cfg.train_rows; idx < ds.count(); ++idx) {
            const auto traj = ds.view(idx);
            const auto pred = flow::forecast(net, traj.row(g.n), g, cfg.forecast);
            r.f_source.push_back(f_source(traj::spec_for_trajectory(ds.meta, idx), pred,
                                          traj::task_for_trajectory(ds.meta, idx)));
            r.recorded_final.push_back(ds.meta.final_loss[idx]);
            r.forecast_mse.push_back(mse(pred, traj.row(g.m)));
        }
        r.median_f_source = median(r.f_source);
        r.median_recorded_final = median(r.recorded_final);
        out[i] = std::move(r);
    });
    return out;
}

std::string cells_csv(const Report& report) {
    std::string out = "model,optimizer,beta,gamma,zeta,n,m,seed,test_mse,f_source\n";
    for (const auto& c : report.cells) {
        out += std::string(to_string(c.model)) + "," + std::string(optim::to_string(c.optimizer)) + "," +
               num(c.gfm.beta) + "," + num(c.gfm.gamma) + "," + num(c.gfm.zeta) + "," +
               std::to_string(c.gfm.n) + "," + std::to_string(c.gfm.m) + "," + std::to_string(c.seed) + "," +
               num(c.test_mse) + "," + num(c.f_source) + "\n";
    }
    return out;
}

std::string results_csv(const Report& report) {
    std::string out = "model,optimizer,beta,gamma,zeta,mean,std,best,per_seed_mse\n";
    for (const auto& r : report.results) {
        std::string seeds;
        for (std::size_t k = 0; k < r.per_seed_mse.size(); ++k) {
            if (k > 0) seeds += ";";
            seeds += num(r.per_seed_mse[k]);
        }
        out += std::string(to_string(r.model)) + "," + std::string(optim::to_string(r.optimizer)) + "," +
               num(r.beta) + "," + num(r.gamma) + "," + num(r.zeta) + "," + num(r.mean) + "," + num(r.std) +
               "," + (r.best ? "1" : "0") + "," + seeds + "\n";
    }
    return out;
}

std::string config_json(const ExperimentConfig& cfg) {
    detail::json models = detail::json::array();
    for (auto m : cfg.models) models.push_back(std::string(to_string(m)));
    detail::json opts = detail::json::array();
    for (auto o : cfg.optimizers) opts.push_back(std::string(optim::to_string(o)));
    detail::json j{{"models", models},
                   {"optimizers", opts},
                   {"seeds", cfg.seeds},
                   {"n_traj", cfg.n_traj},
                   {"train_fraction", cfg.train_fraction},
                   {"data_init", std::string(nn::to_string(cfg.data_init))},
                   {"gfm", detail::to_json(cfg.gfm)},
                   {"forecast", detail::to_json(cfg.forecast)},
                   {"baseline", baseline_config_json(cfg.baseline)}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    ExperimentConfig cfg;
    try {
        const auto j = detail::json::parse(text);
        cfg.models.clear();
        for (const auto& m : j.at("models")) cfg.models.push_back(parse_model(m.get<std::string>()));
        cfg.optimizers.clear();
        for (const auto& o : j.at("optimizers")) cfg.optimizers.push_back(optim::parse_optimizer(o.get<std::string>()));
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        cfg.n_traj = j.at("n_traj").get<std::size_t>();
        cfg.train_fraction = j.at("train_fraction").get<double>();
        cfg.data_init = nn::parse_init_scheme(j.at("data_init").get<std::string>());
        cfg.gfm = detail::gfm_config_from_json(j.at("gfm"));
        cfg.forecast = detail::forecast_options_from_json(j.at("forecast"));
        const auto& b = j.at("baseline");
        cfg.baseline.lr = b.at("lr").get<double>();
        cfg.baseline.epochs = b.at("epochs").get<std::size_t>();
        cfg.baseline.batch_size = b.at("batch_size").get<std::size_t>();
        cfg.baseline.seed = b.at("seed").get<std::uint64_t>();
    } catch (const detail::json::parse_error& e) {
        throw FormatError(std::string("experiment config: ") + e.what(), e.byte);
    } catch (const detail::json::exception& e) {
        throw FormatError(std::string("experiment config: ") + e.what(), 0);
    }
    cfg.validate();
    return cfg;
}

std::string report_json(const Report& report) {
    detail::json cells = detail::json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"model", std::string(to_string(c.model))},
                         {"optimizer", std::string(optim::to_string(c.optimizer))},
                         {"seed", c.seed},
                         {"gfm", detail::to_json(c.gfm)},
                         {"test_mse", c.test_mse},
                         {"f_source", c.f_source}});
    }
    detail::json j{{"config", detail::json::parse(config_json(report.config))},
                   {"results", results_json(report.results)},
                   {"cells", cells}};
    return j.dump(2) + "\n";
}

std::string generalization_csv(const std::vector<GeneralizationResult>& results) {
    std::string out = "optimizer,seed,median_f_source,median_recorded_final,mean_forecast_mse\n";
    for (const auto& r : results) {
        out += std::string(optim::to_string(r.optimizer)) + "," + std::to_string(r.seed) + "," +
               num(r.median_f_source) + "," + num(r.median_recorded_final) + "," + num(mean(r.forecast_mse)) +
               "\n";
    }
    return out;
}

std::string generalization_config_json(const GeneralizationConfig& cfg) {
    detail::json opts = detail::json::array();
    for (auto o : cfg.optimizers) opts.push_back(std::string(optim::to_string(o)));
    detail::json j{{"preset", "mlp_generalization"},
                   {"optimizers", opts},
                   {"seeds", cfg.seeds},
                   {"activation", std::string(nn::to_string(cfg.activation))},
                   {"lr", cfg.lr},
                   {"train_rows", cfg.train_rows},
                   {"gfm", detail::to_json(cfg.gfm)},
                   {"forecast", detail::to_json(cfg.forecast)}};
    return j.dump(2) + "\n";
}

}  // namespace gfm::eval
