#include "gfm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gfm/errors.hpp"
#include "gfm/optimizers.hpp"
#include "gfm/rng.hpp"

namespace gfm::baselines {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr double kAffineGuard = 1e-10;

// dlinear parameter blocks, in storage order
struct DlinearLayout {
    std::size_t dim;
    std::size_t steps;  // n + 1
    std::size_t scale() const { return 0; }
    std::size_t shift() const { return dim; }
    std::size_t temporal() const { return 2 * dim; }
    std::size_t temporal_bias() const { return 2 * dim + steps; }
    std::size_t channel() const { return temporal_bias() + 1; }
    std::size_t channel_bias() const { return channel() + dim * dim; }
    std::size_t size() const { return channel_bias() + dim; }
};

void check_prefix(const BaselineModel& model, const TrajectoryView& traj) {
    if (traj.dim() != model.dim) throw ShapeError("trajectory dimension does not match the baseline model");
    if (traj.length() < model.n + 1) throw ShapeError("prefix shorter than n + 1 rows");
}

std::vector<double> dense_input(const BaselineModel& model, const TrajectoryView& traj) {
    std::vector<double> x;
    if (model.kind == BaselineKind::lfd2) {
        x.assign(traj.row(0).begin(), traj.row(0).end());
        x.insert(x.end(), traj.row(model.n).begin(), traj.row(model.n).end());
    } else {
        for (std::size_t k = model.n + 1 - kIntrospectionSteps; k <= model.n; ++k) {
            x.insert(x.end(), traj.row(k).begin(), traj.row(k).end());
        }
    }
    return x;
}

struct RevinStats {
    std::vector<double> mean;
    std::vector<double> std;
};

RevinStats revin_stats(const TrajectoryView& traj, std::size_t steps) {
    const std::size_t d = traj.dim();
    RevinStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t c = 0; c < d; ++c) s.mean[c] += traj.row(k)[c];
    }
    for (double& v : s.mean) v /= static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            const double e = traj.row(k)[c] - s.mean[c];
            s.std[c] += e * e;
        }
    }
    for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(steps)), kRevinStdFloor);
    return s;
}

// Forward pass of dlinear for one trajectory; fills the intermediates the
// reverse sweep needs when `grad` is non-empty.
std::vector<double> dlinear_forward(const BaselineModel& model, const TrajectoryView& traj,
                                    std::span<const double> d_out, std::span<double> grad) {
    const DlinearLayout L{model.dim, model.n + 1};
    const auto& p = model.params;
    const std::size_t d = L.dim;
    const RevinStats st = revin_stats(traj, L.steps);

    std::vector<double> unit(L.steps * d);  // (x - mean) / std
    std::vector<double> xn(L.steps * d);
    for (std::size_t k = 0; k < L.steps; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            unit[k * d + c] = (traj.row(k)[c] - st.mean[c]) / st.std[c];
            xn[k * d + c] = p[L.scale() + c] * unit[k * d + c] + p[L.shift() + c];
        }
    }
    std::vector<double> y(d, p[L.temporal_bias()]);
    for (std::size_t k = 0; k < L.steps; ++k) {
        for (std::size_t c = 0; c < d; ++c) y[c] += p[L.temporal() + k] * xn[k * d + c];
    }
    std::vector<double> z(d);
    for (std::size_t o = 0; o < d; ++o) {
        double acc = p[L.channel_bias() + o];
        for (std::size_t c = 0; c < d; ++c) acc += p[L.channel() + c * d + o] * y[c];
        z[o] = acc;
    }
    std::vector<double> out(d);
    for (std::size_t o = 0; o < d; ++o) {
        const double a = p[L.scale() + o] + kAffineGuard;
        out[o] = (z[o] - p[L.shift() + o]) / a * st.std[o] + st.mean[o];
    }
    if (grad.empty()) return out;

    std::vector<double> dz(d);
    for (std::size_t o = 0; o < d; ++o) {
        const double a = p[L.scale() + o] + kAffineGuard;
        dz[o] = d_out[o] * st.std[o] / a;
        grad[L.scale() + o] -= d_out[o] * (z[o] - p[L.shift() + o]) * st.std[o] / (a * a);
        grad[L.shift() + o] -= dz[o];
    }
    std::vector<double> dy(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t o = 0; o < d; ++o) {
            grad[L.channel() + c * d + o] += y[c] * dz[o];
            dy[c] += p[L.channel() + c * d + o] * dz[o];
        }
    }
    for (std::size_t o = 0; o < d; ++o) grad[L.channel_bias() + o] += dz[o];
    for (std::size_t c = 0; c < d; ++c) grad[L.temporal_bias()] += dy[c];
    for (std::size_t k = 0; k < L.steps; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            grad[L.temporal() + k] += xn[k * d + c] * dy[c];
            const double dxn = p[L.temporal() + k] * dy[c];
            grad[L.scale() + c] += dxn * unit[k * d + c];
            grad[L.shift() + c] += dxn;
        }
    }
    return out;
}

void check_config(BaselineKind kind, std::size_t n, std::size_t m) {
    if (kind == BaselineKind::introspection && n + 1 < kIntrospectionSteps) {
        throw std::invalid_argument("introspection needs n >= 3 (four observed steps)");
    }
    if (m <= n) throw std::invalid_argument("target index m must exceed n");
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::lfd2: return "lfd2";
        case BaselineKind::introspection: return "introspection";
        case BaselineKind::dlinear: return "dlinear";
    }
    return "unknown";
}

BaselineKind parse_baseline(std::string_view name) {
    if (name == "lfd2") return BaselineKind::lfd2;
    if (name == "introspection") return BaselineKind::introspection;
    if (name == "dlinear") return BaselineKind::dlinear;
    throw std::invalid_argument("unknown baseline '" + std::string(name) + "'");
}

void BaselineConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("baseline lr must be positive");
    if (batch_size == 0) throw std::invalid_argument("baseline batch size must be positive");
}

nn::NetSpec dense_spec(BaselineKind kind, std::size_t dim) {
    switch (kind) {
        case BaselineKind::lfd2: return {2 * dim, {}, dim, nn::Activation::identity};
        case BaselineKind::introspection:
            return {kIntrospectionSteps * dim, {kIntrospectionHidden}, dim, nn::Activation::relu};
        case BaselineKind::dlinear: break;
    }
    throw std::invalid_argument("dlinear is not a dense network");
}

std::size_t param_count(BaselineKind kind, std::size_t dim, std::size_t n) {
    if (kind == BaselineKind::dlinear) return DlinearLayout{dim, n + 1}.size();
    return nn::param_count(dense_spec(kind, dim));
}

BaselineModel init_baseline(BaselineKind kind, std::size_t dim, std::size_t n, std::size_t m,
                            std::uint64_t seed) {
    if (dim == 0) throw ShapeError("baseline dimension must be positive");
    check_config(kind, n, m);
    BaselineModel model{kind, dim, n, m, {}, {}};
    const std::uint64_t s = derive_seed(seed, kInitStream);
    if (kind != BaselineKind::dlinear) {
        model.params = nn::init_params(dense_spec(kind, dim), nn::InitScheme::xavier_normal, s);
        return model;
    }
    const DlinearLayout L{dim, n + 1};
    model.params.assign(L.size(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
        model.params[L.scale() + c] = 1.0;
        model.params[L.channel() + c * dim + c] = 1.0;
    }
    for (std::size_t k = 0; k < L.steps; ++k) model.params[L.temporal() + k] = 1.0 / static_cast<double>(L.steps);
    return model;
}

std::vector<double> predict_baseline(const BaselineModel& model, const TrajectoryView& prefix) {
    check_prefix(model, prefix);
    if (model.params.size() != param_count(model.kind, model.dim, model.n)) {
        throw ShapeError("baseline parameter vector has the wrong length");
    }
    if (model.kind == BaselineKind::dlinear) return dlinear_forward(model, prefix, {}, {});
    const auto x = dense_input(model, prefix);
    return nn::forward(dense_spec(model.kind, model.dim), model.params, x);
}

nn::LossGrad baseline_loss_and_grad(const BaselineModel& model, std::span<const TrajectoryView> batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    for (const auto& traj : batch) {
        check_prefix(model, traj);
        if (traj.length() <= model.m) throw ShapeError("trajectory has no row m");
    }
    const double scale = 1.0 / static_cast<double>(batch.size());

    if (model.kind != BaselineKind::dlinear) {
        const auto spec = dense_spec(model.kind, model.dim);
        nn::Matrix xs(batch.size(), spec.input_dim);
        nn::Matrix ys(batch.size(), model.dim);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const auto x = dense_input(model, batch[r]);
            std::copy(x.begin(), x.end(), xs.row(r).begin());
            const auto target = batch[r].row(model.m);
            std::copy(target.begin(), target.end(), ys.row(r).begin());
        }
        return nn::loss_and_grad(spec, model.params, xs, ys);
    }

    nn::LossGrad out{0.0, std::vector<double>(model.params.size(), 0.0)};
    std::vector<double> d_out(model.dim);
    for (const auto& traj : batch) {
        const auto pred = dlinear_forward(model, traj, {}, {});
        const auto target = traj.row(model.m);
        for (std::size_t o = 0; o < model.dim; ++o) {
            const double e = pred[o] - target[o];
            out.loss += scale * e * e;
            d_out[o] = 2.0 * scale * e;
        }
        dlinear_forward(model, traj, d_out, out.grad);
    }
    return out;
}

BaselineModel fit_baseline(BaselineKind kind, std::span<const TrajectoryView> train, std::size_t n,
                           std::size_t m, const BaselineConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw std::invalid_argument("training set is empty");
    BaselineModel model = init_baseline(kind, train.front().dim(), n, m, cfg.seed);

    Rng rng(derive_seed(cfg.seed, kTrainStream));
    optim::OptimizerConfig adam = optim::default_config(optim::OptimizerKind::adam);
    adam.lr = cfg.lr;
    optim::OptimizerState state;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrajectoryView> batch;
    model.loss_curve.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(train[order[k]]);
            const auto lg = baseline_loss_and_grad(model, batch);
            if (!std::isfinite(lg.loss)) {
                throw NumericError(std::string(to_string(kind)) + ": non-finite training loss at epoch " +
                                   std::to_string(epoch));
            }
            optim::apply_step(adam, state, model.params, lg.grad);
            epoch_loss += lg.loss;
            ++batches;
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return model;
}

}  // namespace gfm::baselines
