#pragma once

// Experiment harness: train/test splits, metrics, seed-repeated model x
// optimizer grids, (beta, gamma, zeta) sweeps, the cross-architecture
// generalization preset, and CSV / JSON reports.

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gfm/baselines.hpp"
#include "gfm/flow.hpp"
#include "gfm/optimizers.hpp"
#include "gfm/traj_gen.hpp"

namespace gfm::eval {

enum class ModelKind { gfm, lfd2, introspection, dlinear };
std::string_view to_string(ModelKind kind);
ModelKind parse_model(std::string_view name);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Shuffles 0..count-1 with derive_seed(seed, 0) and takes the first
/// round(count * train_fraction) as the training side.
Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed);
std::pair<traj::TrajectoryDataset, traj::TrajectoryDataset>
split_dataset(const traj::TrajectoryDataset& ds, double train_fraction, std::uint64_t seed);

/// Mean over coordinates of the squared difference.
double mse(std::span<const double> pred, std::span<const double> truth);
/// Task MSE of `spec` instantiated at `params`.
double f_source(const nn::NetSpec& spec, std::span<const double> params, const traj::RegressionTask& task);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> xs);
double median(std::vector<double> xs);

struct ExperimentConfig {
    std::vector<ModelKind> models{ModelKind::gfm, ModelKind::lfd2, ModelKind::introspection,
                                  ModelKind::dlinear};
    std::vector<optim::OptimizerKind> optimizers{std::begin(optim::kTrajectoryOptimizers),
                                                 std::end(optim::kTrajectoryOptimizers)};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t n_traj = 50;
    double train_fraction = 0.6;
    nn::InitScheme data_init = nn::InitScheme::std_normal;
    flow::GfmConfig gfm;
    flow::ForecastOptions forecast;
    baselines::BaselineConfig baseline;
    std::size_t jobs = 1;  // affects wall time only

    void validate() const;
};

/// One (model, optimizer, grid point, seed) run. `gfm` holds the GFM
/// settings of the cell with its seed field set to the cell seed.
struct CellResult {
    ModelKind model = ModelKind::gfm;
    optim::OptimizerKind optimizer = optim::OptimizerKind::sgd;
    std::uint64_t seed = 0;
    flow::GfmConfig gfm;
    double test_mse = 0.0;  // mean over test trajectories
    double f_source = 0.0;  // mean task loss at the forecast weights
};

/// Seed aggregate of one (model, optimizer, grid point).
struct ExperimentResult {
    ModelKind model = ModelKind::gfm;
    optim::OptimizerKind optimizer = optim::OptimizerKind::sgd;
    double beta = 0.0;
    double gamma = 0.0;
    double zeta = 0.0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> per_seed_mse;
    std::vector<double> per_seed_f_source;
    double mean = 0.0;
    double std = 0.0;
    bool best = false;  // lowest mean for this optimizer within a sweep
};

struct Report {
    ExperimentConfig config;
    std::vector<CellResult> cells;
    std::vector<ExperimentResult> results;
};

/// Dataset for one (optimizer, seed): n_traj linreg trajectories generated
/// with that optimizer's default config and dataset seed = seed.
traj::TrajectoryDataset experiment_dataset(const ExperimentConfig& cfg, optim::OptimizerKind optimizer,
                                           std::uint64_t seed);

/// Splits `ds` with `seed`, fits `model` on the training side and scores the
/// test side. `gfm` overrides cfg.gfm (its seed is replaced by `seed`).
CellResult run_cell(const ExperimentConfig& cfg, const traj::TrajectoryDataset& ds, ModelKind model,
                    optim::OptimizerKind optimizer, std::uint64_t seed, const flow::GfmConfig& gfm);
CellResult run_cell(const ExperimentConfig& cfg, ModelKind model, optim::OptimizerKind optimizer,
                    std::uint64_t seed);

/// Every model x optimizer x seed cell; results ordered by model then optimizer.
Report run_experiment(const ExperimentConfig& cfg);

/// Reference best (beta, gamma, zeta) per optimizer from the published
/// sensitivity study, applied on top of `base`:
///   sgd (0, 0, 10), adam (0, 0.1, 1), adamw (0, 1, 100),
///   rmsprop (0.1, 1, 100), adagrad (0.1, 1, 100).
flow::GfmConfig best_config(optim::OptimizerKind kind, const flow::GfmConfig& base = {});

/// GFM only, each optimizer with its best_config.
Report run_best_configs(const ExperimentConfig& cfg);

struct SweepGrid {
    std::vector<double> betas;
    std::vector<double> gammas;
    std::vector<double> zetas;

    /// beta, gamma in {0, 0.1, 1, 10}; zeta in {0, 1, 10, 100}.
    static SweepGrid full();
    std::size_t size() const { return betas.size() * gammas.size() * zetas.size(); }
};

/// GFM over every grid point x optimizer x seed. Results are ordered by
/// (beta, gamma, zeta, optimizer) and the per-optimizer argmin is flagged.
Report sensitivity_sweep(const SweepGrid& grid, const ExperimentConfig& cfg);

/// Cross-architecture forecasting: GFM trains on the first `train_rows`
/// trajectories of an MLP dataset and forecasts the remaining ones.
struct GeneralizationConfig {
    std::vector<optim::OptimizerKind> optimizers{optim::OptimizerKind::sgd, optim::OptimizerKind::adam,
                                                 optim::OptimizerKind::adamw,
                                                 optim::OptimizerKind::rmsprop};
    std::vector<std::uint64_t> seeds{0};
    nn::Activation activation = nn::Activation::relu;
    double lr = 0.0;  // 0 -> optimizer default
    std::size_t train_rows = 30;
    flow::GfmConfig gfm;
    flow::ForecastOptions forecast;
    std::size_t jobs = 1;
};

struct GeneralizationResult {
    optim::OptimizerKind optimizer = optim::OptimizerKind::sgd;
    std::uint64_t seed = 0;
    std::vector<double> f_source;          // per forecast trajectory
    std::vector<double> recorded_final;    // ground-truth final task loss, same rows
    std::vector<double> forecast_mse;      // parameter-space MSE, same rows
    double median_f_source = 0.0;
    double median_recorded_final = 0.0;
};

std::vector<GeneralizationResult> run_generalization(const GeneralizationConfig& cfg);

/// One row per cell: model, optimizer, beta, gamma, zeta, n, m, seed,
/// test_mse, f_source.
std::string cells_csv(const Report& report);
/// One row per aggregate: model, optimizer, beta, gamma, zeta, mean, std,
/// best, then the per-seed values joined with ';'.
std::string results_csv(const Report& report);
/// Config snapshot, aggregates and cells as pretty JSON.
std::string report_json(const Report& report);

std::string config_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

std::string generalization_csv(const std::vector<GeneralizationResult>& results);
std::string generalization_config_json(const GeneralizationConfig& cfg);

}  // namespace gfm::eval
