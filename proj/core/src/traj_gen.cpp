#include "gfm/traj_gen.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gfm/errors.hpp"
#include "gfm/parallel.hpp"
#include "gfm/rng.hpp"

namespace gfm::traj {

namespace {

enum Stream : std::uint64_t { kTaskStream = 0, kInitStream = 1, kBatchStream = 2 };

struct TaskMatrices {
    nn::Matrix xs;
    nn::Matrix ys;
};

TaskMatrices to_matrices(const RegressionTask& task) {
    TaskMatrices m{nn::Matrix(task.xs.size(), 1), nn::Matrix(task.ys.size(), 1)};
    std::copy(task.xs.begin(), task.xs.end(), m.xs.values().begin());
    std::copy(task.ys.begin(), task.ys.end(), m.ys.values().begin());
    return m;
}

TaskMatrices gather(const TaskMatrices& all, std::span<const std::size_t> rows) {
    TaskMatrices m{nn::Matrix(rows.size(), 1), nn::Matrix(rows.size(), 1)};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        m.xs(k, 0) = all.xs(rows[k], 0);
        m.ys(k, 0) = all.ys(rows[k], 0);
    }
    return m;
}

// One recorded interval: a single full-batch step, or one epoch of shuffled
// mini-batches. Shared by generation and replay so both follow the same path.
class EpochRunner {
public:
    EpochRunner(const nn::NetSpec& spec, const RegressionTask& task,
                const optim::OptimizerConfig& optimizer, std::size_t batch_size,
                std::uint64_t batch_seed)
        : spec_(spec), optimizer_(optimizer), batch_size_(batch_size), data_(to_matrices(task)),
          order_(task.xs.size()), rng_(batch_seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    // Returns false when a non-finite loss was met.
    bool run(std::vector<double>& params) {
        if (batch_size_ == 0 || batch_size_ >= order_.size()) {
            return step_on(data_, params);
        }
        rng_.shuffle(order_.begin(), order_.end());
        for (std::size_t start = 0; start < order_.size(); start += batch_size_) {
            const std::size_t stop = std::min(order_.size(), start + batch_size_);
            const auto batch = gather(data_, std::span(order_).subspan(start, stop - start));
            if (!step_on(batch, params)) return false;
        }
        return true;
    }

private:
    bool step_on(const TaskMatrices& batch, std::vector<double>& params) {
        const auto lg = nn::loss_and_grad(spec_, params, batch.xs, batch.ys);
        if (!std::isfinite(lg.loss)) return false;
        optim::apply_step(optimizer_, state_, params, lg.grad);
        return true;
    }

    const nn::NetSpec& spec_;
    const optim::OptimizerConfig& optimizer_;
    std::size_t batch_size_;
    TaskMatrices data_;
    std::vector<std::size_t> order_;
    Rng rng_;
    optim::OptimizerState state_;
};

void check_finite_row(std::span<const double> row, std::size_t traj, std::size_t step) {
    for (double v : row) {
        if (!std::isfinite(v)) {
            throw NumericError("trajectory " + std::to_string(traj) + ": non-finite weights at step " +
                               std::to_string(step));
        }
    }
}

TrajectoryDataset generate(DatasetMeta meta, std::size_t dim, const GenerationOptions& options) {
    std::size_t n_traj = 0;
    for (const auto& g : meta.architectures) n_traj += g.count;
    if (n_traj == 0) throw std::invalid_argument("at least one trajectory is required");
    meta.optimizer.validate();
    meta.steps = options.steps;
    meta.initial_loss.assign(n_traj, 0.0);
    meta.final_loss.assign(n_traj, 0.0);

    TrajectoryDataset ds(n_traj, options.steps + 1, dim);
    parallel_for(n_traj, options.jobs, [&](std::size_t i) {
        const auto& spec = spec_for_trajectory(meta, i);
        const auto tseed = trajectory_seed(meta.seed, i);
        const auto task = sample_linreg_task(derive_seed(tseed, kTaskStream));
        auto params = nn::init_params(spec, meta.init, derive_seed(tseed, kInitStream));
        EpochRunner runner(spec, task, meta.optimizer, meta.batch_size, derive_seed(tseed, kBatchStream));

        std::copy(params.begin(), params.end(), ds.row(i, 0).begin());
        meta.initial_loss[i] = task_loss(spec, params, task);
        for (std::size_t k = 1; k <= options.steps; ++k) {
            if (!runner.run(params)) {
                throw NumericError("trajectory " + std::to_string(i) + ": non-finite loss during step " +
                                   std::to_string(k));
            }
            check_finite_row(params, i, k);
            std::copy(params.begin(), params.end(), ds.row(i, k).begin());
        }
        meta.final_loss[i] = task_loss(spec, params, task);
        if (!std::isfinite(meta.final_loss[i])) {
            throw NumericError("trajectory " + std::to_string(i) + ": non-finite final loss");
        }
    });
    ds.meta = std::move(meta);
    return ds;
}

}  // namespace

RegressionTask sample_linreg_task(std::uint64_t seed) {
    Rng rng(seed);
    RegressionTask task;
    task.slope = rng.normal(2.0, 0.1);
    task.intercept = rng.normal(1.0, 0.1);
    task.noise_sigma = kNoiseSigma;
    task.xs.resize(kTaskPoints);
    task.ys.resize(kTaskPoints);
    for (std::size_t i = 0; i < kTaskPoints; ++i) task.xs[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < kTaskPoints; ++i) {
        task.ys[i] = task.slope * task.xs[i] + task.intercept + rng.normal(0.0, task.noise_sigma);
    }
    return task;
}

std::array<double, 2> closed_form_optimum(const RegressionTask& task) {
    const std::size_t n = task.xs.size();
    if (n == 0 || task.ys.size() != n) throw ShapeError("task has no points or mismatched targets");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += task.xs[i];
        sy += task.ys[i];
        sxx += task.xs[i] * task.xs[i];
        sxy += task.xs[i] * task.ys[i];
    }
    const double nn = static_cast<double>(n);
    const double det = nn * sxx - sx * sx;
    // Centered variance scaled by n^2; zero exactly when all xs coincide.
    double spread = 0.0;
    const double mean_x = sx / nn;
    for (double x : task.xs) spread += (x - mean_x) * (x - mean_x);
    if (spread <= 0.0 || det == 0.0) throw NumericError("singular design: all inputs are identical");
    const double slope = (nn * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / nn;
    return {slope, intercept};
}

double task_loss(const nn::NetSpec& spec, std::span<const double> params, const RegressionTask& task) {
    const auto m = to_matrices(task);
    return nn::mse_loss(spec, params, m.xs, m.ys);
}

nn::NetSpec linreg_spec() {
    return nn::NetSpec{1, {}, 1, nn::Activation::identity};
}

std::string_view to_string(TaskFamily f) {
    return f == TaskFamily::linreg ? "linreg" : "mlp";
}

TaskFamily parse_family(std::string_view name) {
    if (name == "linreg") return TaskFamily::linreg;
    if (name == "mlp") return TaskFamily::mlp;
    throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

std::vector<ArchGroup> default_mlp_mix(nn::Activation activation) {
    return {
        {nn::NetSpec{1, {2, 2, 1}, 1, activation}, 30},
        {nn::NetSpec{1, {4, 1}, 1, activation}, 20},
    };
}

std::vector<TrajectoryView> TrajectoryDataset::views() const {
    std::vector<TrajectoryView> out;
    out.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) out.push_back(view(i));
    return out;
}

std::vector<TrajectoryView> TrajectoryDataset::views(std::span<const std::size_t> indices) const {
    std::vector<TrajectoryView> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(view(i));
    return out;
}

TrajectoryDataset TrajectoryDataset::subset(std::span<const std::size_t> indices) const {
    TrajectoryDataset out(indices.size(), t_, d_);
    out.meta = meta;
    out.meta.initial_loss.clear();
    out.meta.final_loss.clear();
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto i = indices[k];
        if (i >= n_) throw std::out_of_range("trajectory index out of range");
        const auto src = view(i).values();
        std::copy(src.begin(), src.end(), out.data_.begin() + k * t_ * d_);
        if (i < meta.initial_loss.size()) out.meta.initial_loss.push_back(meta.initial_loss[i]);
        if (i < meta.final_loss.size()) out.meta.final_loss.push_back(meta.final_loss[i]);
    }
    return out;
}

std::uint64_t trajectory_seed(std::uint64_t dataset_seed, std::size_t index) {
    return derive_seed(dataset_seed, index);
}

TrajectoryDataset generate_linreg_trajectories(const optim::OptimizerConfig& optimizer,
                                               std::size_t n_traj, std::uint64_t seed,
                                               nn::InitScheme init,
                                               const GenerationOptions& options) {
    if (n_traj == 0) throw std::invalid_argument("n_traj must be at least 1");
    DatasetMeta meta;
    meta.family = TaskFamily::linreg;
    meta.optimizer = optimizer;
    meta.init = init;
    meta.seed = seed;
    meta.architectures = {{linreg_spec(), n_traj}};
    meta.batch_size = 0;
    return generate(std::move(meta), 2, options);
}

TrajectoryDataset generate_mlp_trajectories(const std::vector<ArchGroup>& arch_mix,
                                            const optim::OptimizerConfig& optimizer,
                                            std::uint64_t seed, nn::InitScheme init,
                                            std::size_t batch_size,
                                            const GenerationOptions& options) {
    if (arch_mix.empty()) throw std::invalid_argument("architecture mix is empty");
    const std::size_t dim = nn::param_count(arch_mix.front().spec);
    for (const auto& g : arch_mix) {
        g.spec.validate();
        if (g.spec.input_dim != 1 || g.spec.output_dim != 1) {
            throw ShapeError("task networks map a scalar input to a scalar output");
        }
        if (nn::param_count(g.spec) != dim) {
            throw ShapeError("architectures disagree on parameter count (" + std::to_string(dim) + " vs " +
                             std::to_string(nn::param_count(g.spec)) + ")");
        }
    }
    DatasetMeta meta;
    meta.family = TaskFamily::mlp;
    meta.optimizer = optimizer;
    meta.init = init;
    meta.seed = seed;
    meta.architectures = arch_mix;
    meta.batch_size = batch_size;
    return generate(std::move(meta), dim, options);
}

RegressionTask task_for_trajectory(const DatasetMeta& meta, std::size_t index) {
    return sample_linreg_task(derive_seed(trajectory_seed(meta.seed, index), kTaskStream));
}

const nn::NetSpec& spec_for_trajectory(const DatasetMeta& meta, std::size_t index) {
    std::size_t seen = 0;
    for (const auto& g : meta.architectures) {
        seen += g.count;
        if (index < seen) return g.spec;
    }
    throw std::out_of_range("trajectory index " + std::to_string(index) + " beyond architecture mix");
}

double replay_max_deviation(const TrajectoryDataset& ds, std::size_t index) {
    const auto& meta = ds.meta;
    const auto& spec = spec_for_trajectory(meta, index);
    const auto tseed = trajectory_seed(meta.seed, index);
    const auto task = task_for_trajectory(meta, index);
    EpochRunner runner(spec, task, meta.optimizer, meta.batch_size, derive_seed(tseed, kBatchStream));
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < ds.length(); ++k) {
        const auto recorded = ds.row(index, k);
        std::vector<double> params(recorded.begin(), recorded.end());
        runner.run(params);
        const auto next = ds.row(index, k + 1);
        for (std::size_t d = 0; d < params.size(); ++d) {
            worst = std::max(worst, std::abs(params[d] - next[d]));
        }
    }
    return worst;
}

}  // namespace gfm::traj
