#pragma once

// Direct regressors from an observed prefix to the final weights: a linear
// map on (w_0, w_n), a dense regressor on the last four prefix steps, and a
// DLinear-style projection wrapped in reversible instance normalization.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gfm/smallnet.hpp"
#include "gfm/traj_gen.hpp"

namespace gfm::baselines {

using traj::TrajectoryView;

enum class BaselineKind { lfd2, introspection, dlinear };
std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

inline constexpr std::size_t kIntrospectionSteps = 4;
inline constexpr std::size_t kIntrospectionHidden = 100;
inline constexpr double kRevinStdFloor = 1e-5;

struct BaselineConfig {
    double lr = 1e-4;
    std::size_t epochs = 1000;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const BaselineConfig&, const BaselineConfig&) = default;
};

struct BaselineModel {
    BaselineKind kind = BaselineKind::lfd2;
    std::size_t dim = 0;
    std::size_t n = 4;
    std::size_t m = 199;
    std::vector<double> params;
    std::vector<double> loss_curve;

    friend bool operator==(const BaselineModel&, const BaselineModel&) = default;
};

/// Dense-net shape used by lfd2 (2D -> D, affine) and introspection
/// (4D -> 100 -> D, relu).
nn::NetSpec dense_spec(BaselineKind kind, std::size_t dim);
std::size_t param_count(BaselineKind kind, std::size_t dim, std::size_t n);

/// Fresh parameters. Dense kinds use xavier_normal; dlinear starts from an
/// averaging temporal projection, identity channel projection and the
/// identity RevIN affine (scale 1, shift 0).
BaselineModel init_baseline(BaselineKind kind, std::size_t dim, std::size_t n, std::size_t m,
                            std::uint64_t seed);

/// Minimizes the batch mean of ||prediction - w_m||^2 with Adam over shuffled
/// mini-batches. Deterministic per cfg.seed.
BaselineModel fit_baseline(BaselineKind kind, std::span<const TrajectoryView> train,
                           std::size_t n, std::size_t m, const BaselineConfig& cfg);

/// `prefix` must hold at least rows 0..n; later rows are ignored.
std::vector<double> predict_baseline(const BaselineModel& model, const TrajectoryView& prefix);

/// Loss (batch mean of squared error summed over coordinates) and gradient
/// w.r.t. model.params over the given trajectories.
nn::LossGrad baseline_loss_and_grad(const BaselineModel& model,
                                    std::span<const TrajectoryView> batch);

}  // namespace gfm::baselines
