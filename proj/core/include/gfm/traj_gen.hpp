#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gfm/optimizers.hpp"
#include "gfm/smallnet.hpp"

namespace gfm::traj {

inline constexpr std::size_t kTaskPoints = 100;
inline constexpr double kNoiseSigma = 0.1;
inline constexpr std::size_t kUpdateSteps = 199;
inline constexpr std::size_t kMlpBatchSize = 64;

/// y = slope * x + intercept + noise, sampled on x in [-1, 1].
struct RegressionTask {
    double slope = 0.0;
    double intercept = 0.0;
    double noise_sigma = kNoiseSigma;
    std::vector<double> xs;
    std::vector<double> ys;
};

/// slope ~ N(2, 0.1^2), intercept ~ N(1, 0.1^2), 100 points, noise std 0.1.
RegressionTask sample_linreg_task(std::uint64_t seed);

/// Least-squares (slope, intercept) via the 2x2 normal equations.
std::array<double, 2> closed_form_optimum(const RegressionTask& task);

/// Task MSE of a scalar network evaluated on the task's points.
double task_loss(const nn::NetSpec& spec, std::span<const double> params, const RegressionTask& task);

/// 1 -> 1 affine model; parameters are (slope, intercept).
nn::NetSpec linreg_spec();

enum class TaskFamily { linreg, mlp };
std::string_view to_string(TaskFamily f);
TaskFamily parse_family(std::string_view name);

struct ArchGroup {
    nn::NetSpec spec;
    std::size_t count = 0;

    friend bool operator==(const ArchGroup&, const ArchGroup&) = default;
};

/// 30 x hidden [2,2,1] followed by 20 x hidden [4,1]; both have 15 parameters.
std::vector<ArchGroup> default_mlp_mix(nn::Activation activation = nn::Activation::relu);

struct DatasetMeta {
    TaskFamily family = TaskFamily::linreg;
    optim::OptimizerConfig optimizer;
    nn::InitScheme init = nn::InitScheme::std_normal;
    std::uint64_t seed = 0;
    std::vector<ArchGroup> architectures;
    std::size_t steps = kUpdateSteps;
    std::size_t batch_size = 0;  // 0 = full batch
    double noise_sigma = kNoiseSigma;
    std::vector<double> initial_loss;  // per trajectory, task MSE at row 0
    std::vector<double> final_loss;    // per trajectory, task MSE at the last row

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Read-only T x D view of one trajectory (row-major).
class TrajectoryView {
public:
    TrajectoryView() = default;
    TrajectoryView(std::span<const double> values, std::size_t dim)
        : values_(values), dim_(dim) {}

    std::size_t length() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> row(std::size_t i) const { return values_.subspan(i * dim_, dim_); }
    std::span<const double> values() const { return values_; }

private:
    std::span<const double> values_;
    std::size_t dim_ = 0;
};

/// N trajectories x T recorded steps x D weights. Row 0 of each trajectory is
/// the initialization; row k is the state after k updates (or epochs).
class TrajectoryDataset {
public:
    TrajectoryDataset() = default;
    TrajectoryDataset(std::size_t n, std::size_t t, std::size_t d)
        : n_(n), t_(t), d_(d), data_(n * t * d, 0.0) {}

    std::size_t count() const { return n_; }
    std::size_t length() const { return t_; }
    std::size_t dim() const { return d_; }

    std::span<double> row(std::size_t traj, std::size_t step) {
        return {data_.data() + (traj * t_ + step) * d_, d_};
    }
    std::span<const double> row(std::size_t traj, std::size_t step) const {
        return {data_.data() + (traj * t_ + step) * d_, d_};
    }
    TrajectoryView view(std::size_t traj) const {
        return {std::span<const double>(data_).subspan(traj * t_ * d_, t_ * d_), d_};
    }
    std::vector<TrajectoryView> views() const;
    std::vector<TrajectoryView> views(std::span<const std::size_t> indices) const;

    /// Copy of the selected trajectories (meta carried over, losses subset).
    TrajectoryDataset subset(std::span<const std::size_t> indices) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    DatasetMeta meta;

private:
    std::size_t n_ = 0;
    std::size_t t_ = 0;
    std::size_t d_ = 0;
    std::vector<double> data_;
};

struct GenerationOptions {
    std::size_t steps = kUpdateSteps;
    std::size_t jobs = 1;
};

/// Trajectory i draws everything from derive_seed(seed, i): its task from
/// stream 0, its initialization from stream 1 and its mini-batch order from
/// stream 2. Generation is therefore identical for any `jobs`.
std::uint64_t trajectory_seed(std::uint64_t dataset_seed, std::size_t index);

/// Full-batch training of the 2-parameter linear model on fresh tasks.
TrajectoryDataset generate_linreg_trajectories(const optim::OptimizerConfig& optimizer,
                                               std::size_t n_traj, std::uint64_t seed,
                                               nn::InitScheme init,
                                               const GenerationOptions& options = {});

/// Mini-batch training of each architecture group in order (counts summed),
/// recording weights once per epoch. All specs must share a parameter count.
TrajectoryDataset generate_mlp_trajectories(const std::vector<ArchGroup>& arch_mix,
                                            const optim::OptimizerConfig& optimizer,
                                            std::uint64_t seed,
                                            nn::InitScheme init = nn::InitScheme::std_normal,
                                            std::size_t batch_size = kMlpBatchSize,
                                            const GenerationOptions& options = {});

/// Regenerates the task trajectory `index` was trained on.
RegressionTask task_for_trajectory(const DatasetMeta& meta, std::size_t index);
/// Network spec trajectory `index` was trained with.
const nn::NetSpec& spec_for_trajectory(const DatasetMeta& meta, std::size_t index);

/// Replays trajectory `index` by applying the optimizer to each recorded row
/// (carrying optimizer state) and returns the largest absolute deviation from
/// the next recorded row.
double replay_max_deviation(const TrajectoryDataset& ds, std::size_t index);

}  // namespace gfm::traj
