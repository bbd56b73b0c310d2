#include "gfm/optimizers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gfm/errors.hpp"

namespace gfm::optim {

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sgd_momentum: return "sgd_momentum";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adamw: return "adamw";
        case OptimizerKind::rmsprop: return "rmsprop";
        case OptimizerKind::adagrad: return "adagrad";
    }
    return "unknown";
}

OptimizerKind parse_optimizer(std::string_view name) {
    for (auto k : {OptimizerKind::sgd, OptimizerKind::sgd_momentum, OptimizerKind::adam,
                   OptimizerKind::adamw, OptimizerKind::rmsprop, OptimizerKind::adagrad}) {
        if (name == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x < 1.0; };
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!in_unit(momentum) || !in_unit(beta1) || !in_unit(beta2) || !in_unit(rms_alpha)) {
        throw std::invalid_argument("decay constants must lie in [0, 1)");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

OptimizerConfig default_config(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    switch (kind) {
        case OptimizerKind::adagrad: c.lr = 0.1; break;
        case OptimizerKind::rmsprop: c.weight_decay = 0.01; break;
        case OptimizerKind::adamw: c.weight_decay = 0.01; break;
        default: break;
    }
    return c;
}

void apply_step(const OptimizerConfig& config, OptimizerState& state, std::span<double> params,
                std::span<const double> grad) {
    if (grad.size() != params.size()) {
        throw ShapeError("gradient length " + std::to_string(grad.size()) +
                         " does not match parameter length " + std::to_string(params.size()));
    }
    const std::size_t n = params.size();
    auto ensure = [n](std::vector<double>& buf) {
        if (buf.empty()) buf.assign(n, 0.0);
        if (buf.size() != n) throw ShapeError("optimizer state length does not match parameters");
    };
    ++state.step;
    const double lr = config.lr;
    const double wd = config.weight_decay;
    const bool coupled_decay = wd != 0.0 && config.kind != OptimizerKind::adamw;
    auto effective_grad = [&](std::size_t i) {
        return coupled_decay ? grad[i] + wd * params[i] : grad[i];
    };

    switch (config.kind) {
        case OptimizerKind::sgd:
            for (std::size_t i = 0; i < n; ++i) params[i] -= lr * effective_grad(i);
            break;

        case OptimizerKind::sgd_momentum: {
            ensure(state.m);
            const double mu = config.momentum;
            for (std::size_t i = 0; i < n; ++i) {
                state.m[i] = mu * state.m[i] + (1.0 - mu) * effective_grad(i);
                params[i] -= lr * state.m[i];
            }
            break;
        }

        case OptimizerKind::adam:
        case OptimizerKind::adamw: {
            ensure(state.m);
            ensure(state.v);
            const double b1 = config.beta1;
            const double b2 = config.beta2;
            const double t = static_cast<double>(state.step);
            const double c1 = 1.0 - std::pow(b1, t);
            const double c2 = 1.0 - std::pow(b2, t);
            for (std::size_t i = 0; i < n; ++i) {
                if (config.kind == OptimizerKind::adamw) params[i] -= lr * wd * params[i];
                const double g = effective_grad(i);
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
                const double m_hat = state.m[i] / c1;
                const double v_hat = state.v[i] / c2;
                params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
            }
            break;
        }

        case OptimizerKind::rmsprop: {
            ensure(state.v);
            const double a = config.rms_alpha;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = effective_grad(i);
                state.v[i] = a * state.v[i] + (1.0 - a) * g * g;
                params[i] -= lr * g / (std::sqrt(state.v[i]) + config.eps);
            }
            break;
        }

        case OptimizerKind::adagrad: {
            ensure(state.v);
            for (std::size_t i = 0; i < n; ++i) {
                const double g = effective_grad(i);
                state.v[i] += g * g;
                params[i] -= lr * g / (std::sqrt(state.v[i]) + config.eps);
            }
            break;
        }
    }
}

StepResult step(const OptimizerConfig& config, const OptimizerState& state,
                std::span<const double> params, std::span<const double> grad) {
    StepResult r{{params.begin(), params.end()}, state};
    apply_step(config, r.state, r.params, grad);
    return r;
}

std::vector<double> momentum_unroll_check(const OptimizerConfig& config,
                                          const std::vector<std::vector<double>>& gradient_history) {
    if (config.kind != OptimizerKind::sgd_momentum) {
        throw std::invalid_argument("momentum unrolling requires sgd_momentum");
    }
    if (gradient_history.empty()) throw std::invalid_argument("gradient history is empty");
    const std::size_t dim = gradient_history.front().size();
    const double mu = config.momentum;
    std::vector<double> displacement(dim, 0.0);
    double weight = 1.0;  // mu^k
    for (std::size_t k = 0; k < gradient_history.size(); ++k) {
        const auto& g = gradient_history[gradient_history.size() - 1 - k];
        if (g.size() != dim) throw ShapeError("gradient history has inconsistent lengths");
        for (std::size_t d = 0; d < dim; ++d) displacement[d] += weight * g[d];
        weight *= mu;
    }
    for (double& x : displacement) x *= -config.lr * (1.0 - mu);
    return displacement;
}

}  // namespace gfm::optim
