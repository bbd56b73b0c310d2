#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gfm::optim {

enum class OptimizerKind { sgd, sgd_momentum, adam, adamw, rmsprop, adagrad };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

/// The five optimizers used for trajectory generation, in table order.
inline constexpr OptimizerKind kTrajectoryOptimizers[] = {
    OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::adamw, OptimizerKind::rmsprop,
    OptimizerKind::adagrad};

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double momentum = 0.9;      // sgd_momentum decay
    double beta1 = 0.9;         // adam / adamw
    double beta2 = 0.999;
    double rms_alpha = 0.99;    // rmsprop smoothing
    double weight_decay = 0.0;  // decoupled for adamw, added to the gradient otherwise
    double eps = 1e-8;

    void validate() const;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Trajectory-generation defaults: lr 0.01 (0.1 for adagrad), rmsprop
/// alpha 0.99 with weight decay 0.01, adamw weight decay 0.01, betas (0.9, 0.999).
OptimizerConfig default_config(OptimizerKind kind);

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<double> m;  // first moment / momentum buffer
    std::vector<double> v;  // second moment / squared-gradient accumulator
};

/// In-place update of `params` and `state`.
void apply_step(const OptimizerConfig& config, OptimizerState& state, std::span<double> params,
                std::span<const double> grad);

struct StepResult {
    std::vector<double> params;
    OptimizerState state;
};

/// Pure form of apply_step: inputs are left untouched.
StepResult step(const OptimizerConfig& config, const OptimizerState& state,
                std::span<const double> params, std::span<const double> grad);

/// Closed-form displacement of the last momentum step,
/// -lr (1 - mu) sum_k mu^k g_{i-k}, for gradients g_0..g_i applied from a
/// fresh state. Test oracle for the momentum recursion.
std::vector<double> momentum_unroll_check(const OptimizerConfig& config,
                                          const std::vector<std::vector<double>>& gradient_history);

}  // namespace gfm::optim
