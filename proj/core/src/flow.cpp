#include "gfm/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "gfm/optimizers.hpp"

namespace gfm::flow {

namespace {

enum Stream : std::uint64_t { kInitStream = 0, kTrainStream = 1 };

void check_trajectory(const TrajectoryView& traj, const GfmConfig& cfg) {
    if (traj.dim() == 0) throw ShapeError("trajectory has zero dimension");
    if (traj.length() <= cfg.m) {
        throw ShapeError("trajectory has " + std::to_string(traj.length()) + " rows; index m = " +
                         std::to_string(cfg.m) + " is required");
    }
}

void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t must lie in [0, 1], got " + std::to_string(t));
}

// (1 - a) x + a y, elementwise
void lerp_into(std::span<double> out, std::span<const double> x, std::span<const double> y, double a) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - a) * x[i] + a * y[i];
}

bool in_prefix(const GridPosition& pos, std::size_t n) {
    return pos.index < n;
}

}  // namespace

void GfmConfig::validate() const {
    if (m == 0 || n >= m) throw std::invalid_argument("flow config requires 0 <= n < m");
    if (beta < 0.0 || gamma < 0.0 || zeta < 0.0) throw std::invalid_argument("beta, gamma, zeta must be non-negative");
    if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
    if (!(train_lr > 0.0)) throw std::invalid_argument("train_lr must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (prefix_decay < 0.0) throw std::invalid_argument("prefix_decay must be non-negative");
}

GridPosition locate(double t, std::size_t m) {
    check_time(t);
    const double md = static_cast<double>(m);
    double tm = t * md;
    const double nearest = std::nearbyint(tm);
    if (std::abs(tm - nearest) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, md)) {
        tm = nearest;
    }
    if (tm >= md) return {m, 0.0};
    const double k = std::floor(tm);
    return {static_cast<std::size_t>(k), tm - k};
}

std::vector<double> interp_weights(const TrajectoryView& traj, double t, std::size_t m) {
    check_time(t);
    if (m >= traj.length()) throw ShapeError("interpolation index m beyond trajectory length");
    const auto pos = locate(t, m);
    const auto lo = traj.row(pos.index);
    if (pos.index == m || pos.omega == 0.0) return {lo.begin(), lo.end()};
    std::vector<double> out(traj.dim());
    lerp_into(out, lo, traj.row(pos.index + 1), pos.omega);
    return out;
}

std::vector<double> path_point(const TrajectoryView& traj, double t, const GfmConfig& cfg,
                               std::span<const double> noise) {
    check_trajectory(traj, cfg);
    const auto pos = locate(t, cfg.m);
    std::vector<double> w;
    if (in_prefix(pos, cfg.n)) {
        w = interp_weights(traj, t, cfg.m);
    } else if (cfg.bridge_from_last_observed) {
        w.resize(traj.dim());
        const double s = (t - cfg.t_start()) / (1.0 - cfg.t_start());
        lerp_into(w, traj.row(cfg.n), traj.row(cfg.m), std::clamp(s, 0.0, 1.0));
    } else {
        w.resize(traj.dim());
        lerp_into(w, traj.row(0), traj.row(cfg.m), t);
    }
    if (!noise.empty()) {
        if (noise.size() != w.size()) throw ShapeError("noise dimension does not match trajectory");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += noise[i];
    }
    return w;
}

std::vector<double> target_field(const TrajectoryView& traj, double t, const GfmConfig& cfg) {
    check_trajectory(traj, cfg);
    const auto pos = locate(t, cfg.m);
    std::vector<double> v(traj.dim());
    const auto [hi, lo] = in_prefix(pos, cfg.n)
        ? std::pair{traj.row(pos.index + 1), traj.row(pos.index)}
        : std::pair{traj.row(cfg.m), traj.row(cfg.n)};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = hi[i] - lo[i];
    return v;
}

PathSample make_path_sample(const TrajectoryView& traj, double t, const GfmConfig& cfg,
                            std::span<const double> noise) {
    const auto pos = locate(t, cfg.m);
    PathSample s;
    s.t = t;
    s.omega = pos.omega;
    s.z = in_prefix(pos, cfg.n);
    s.w_t = path_point(traj, t, cfg, noise);
    s.v_target = target_field(traj, t, cfg);
    return s;
}

double cfm_weight(const GfmConfig& cfg, const PathSample& sample) {
    if (!sample.z) return cfg.gamma;
    double w = cfg.beta;
    const double steps_before_n = static_cast<double>(cfg.n) - sample.t * static_cast<double>(cfg.m);
    if (cfg.prefix_decay > 0.0) w *= std::exp(-cfg.prefix_decay * steps_before_n);
    if (cfg.prefix_window > 0 && steps_before_n > static_cast<double>(cfg.prefix_window)) w = 0.0;
    return w;
}

double cfm_loss(std::span<const double> v_pred, const PathSample& sample, const GfmConfig& cfg) {
    if (v_pred.size() != sample.v_target.size()) throw ShapeError("prediction and target differ in dimension");
    double sq = 0.0;
    for (std::size_t i = 0; i < v_pred.size(); ++i) {
        const double e = v_pred[i] - sample.v_target[i];
        sq += e * e;
    }
    return cfm_weight(cfg, sample) * sq;
}

std::vector<double> VectorFieldNet::operator()(std::span<const double> w, double t) const {
    if (w.size() + 1 != spec.input_dim) throw ShapeError("state dimension does not match vector field");
    std::vector<double> input(w.begin(), w.end());
    input.push_back(t);
    return nn::forward(spec, params, input);
}

VectorFieldNet make_vector_field(std::size_t dim, const GfmConfig& cfg) {
    if (dim == 0) throw ShapeError("vector field dimension must be positive");
    VectorFieldNet net;
    net.spec = nn::NetSpec{dim + 1, cfg.hidden, dim, nn::Activation::elu};
    net.params = nn::init_params(net.spec, cfg.init, derive_seed(cfg.seed, kInitStream));
    return net;
}

std::vector<double> midpoint_predict(const VectorFieldNet& net, std::span<const double> w_n,
                                     const GfmConfig& cfg) {
    return midpoint_predict(net, w_n, cfg.t_start());
}

BatchDraw draw_batch(std::size_t batch_size, std::size_t dim, const GfmConfig& cfg, Rng& rng) {
    BatchDraw draw;
    draw.times.resize(batch_size);
    if (cfg.per_sample_t) {
        for (auto& t : draw.times) t = rng.uniform();
    } else {
        std::fill(draw.times.begin(), draw.times.end(), rng.uniform());
    }
    if (cfg.sigma > 0.0) {
        draw.noise.assign(batch_size, std::vector<double>(dim));
        for (auto& row : draw.noise) {
            for (auto& x : row) x = rng.normal(0.0, cfg.sigma);
        }
    }
    return draw;
}

GfmLoss gfm_loss(const VectorFieldNet& net, std::span<const TrajectoryView> batch,
                 const GfmConfig& cfg, const BatchDraw& draw) {
    const std::size_t B = batch.size();
    if (B == 0) throw std::invalid_argument("empty mini-batch");
    if (draw.times.size() != B) throw ShapeError("batch draw does not match batch size");
    const std::size_t D = net.dim();
    const double inv_b = 1.0 / static_cast<double>(B);
    for (const auto& traj : batch) {
        check_trajectory(traj, cfg);
        if (traj.dim() != D) throw ShapeError("trajectory dimension does not match vector field");
    }

    GfmLoss out;
    out.grad.assign(net.params.size(), 0.0);

    // Flow-matching term at the sampled path points.
    nn::Matrix x_path(B, D + 1);
    std::vector<PathSample> samples;
    samples.reserve(B);
    for (std::size_t j = 0; j < B; ++j) {
        const auto noise = draw.noise.empty() ? std::span<const double>{} : std::span<const double>(draw.noise[j]);
        samples.push_back(make_path_sample(batch[j], draw.times[j], cfg, noise));
        std::copy(samples[j].w_t.begin(), samples[j].w_t.end(), x_path.row(j).begin());
        x_path(j, D) = samples[j].t;
    }
    nn::Tape tape_path;
    const nn::Matrix v_path = nn::forward(net.spec, net.params, x_path, tape_path);
    nn::Matrix d_path(B, D);
    for (std::size_t j = 0; j < B; ++j) {
        const double weight = cfm_weight(cfg, samples[j]);
        double sq = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double e = v_path(j, i) - samples[j].v_target[i];
            sq += e * e;
            d_path(j, i) = 2.0 * weight * e * inv_b;
        }
        out.cfm += weight * sq * inv_b;
    }
    nn::backward(net.spec, net.params, tape_path, d_path, out.grad);

    // Consistency term: midpoint step from w_n to t = 1, compared with w_m.
    const double t_n = cfg.t_start();
    const double dt = 1.0 - t_n;
    nn::Matrix x_start(B, D + 1);
    for (std::size_t j = 0; j < B; ++j) {
        const auto w_n = batch[j].row(cfg.n);
        std::copy(w_n.begin(), w_n.end(), x_start.row(j).begin());
        x_start(j, D) = t_n;
    }
    nn::Tape tape_start;
    const nn::Matrix v_start = nn::forward(net.spec, net.params, x_start, tape_start);
    nn::Matrix x_mid(B, D + 1);
    for (std::size_t j = 0; j < B; ++j) {
        for (std::size_t i = 0; i < D; ++i) x_mid(j, i) = x_start(j, i) + 0.5 * dt * v_start(j, i);
        x_mid(j, D) = t_n + 0.5 * dt;
    }
    nn::Tape tape_mid;
    const nn::Matrix v_mid = nn::forward(net.spec, net.params, x_mid, tape_mid);
    nn::Matrix d_mid(B, D);
    for (std::size_t j = 0; j < B; ++j) {
        const auto w_m = batch[j].row(cfg.m);
        double sq = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double e = x_start(j, i) + dt * v_mid(j, i) - w_m[i];
            sq += e * e;
            d_mid(j, i) = cfg.zeta * 2.0 * e * dt * inv_b;
        }
        out.pred += sq * inv_b;
    }
    if (cfg.zeta != 0.0) {
        const nn::Matrix d_x_mid = nn::backward(net.spec, net.params, tape_mid, d_mid, out.grad);
        nn::Matrix d_start(B, D);
        for (std::size_t j = 0; j < B; ++j) {
            for (std::size_t i = 0; i < D; ++i) d_start(j, i) = 0.5 * dt * d_x_mid(j, i);
        }
        nn::backward(net.spec, net.params, tape_start, d_start, out.grad);
    }
    out.total = out.cfm + cfg.zeta * out.pred;
    return out;
}

GfmLoss gfm_total_loss(const VectorFieldNet& net, std::span<const TrajectoryView> batch,
                       const GfmConfig& cfg, Rng& rng) {
    return gfm_loss(net, batch, cfg, draw_batch(batch.size(), net.dim(), cfg, rng));
}

TrainResult train(std::span<const TrajectoryView> trajectories, const GfmConfig& cfg) {
    cfg.validate();
    if (trajectories.empty()) throw std::invalid_argument("training set is empty");
    const std::size_t dim = trajectories.front().dim();
    for (const auto& traj : trajectories) {
        check_trajectory(traj, cfg);
        if (traj.dim() != dim) throw ShapeError("trajectories disagree on dimension");
    }

    TrainResult result{make_vector_field(dim, cfg), {}};
    result.loss_curve.reserve(cfg.epochs);
    Rng rng(derive_seed(cfg.seed, kTrainStream));
    optim::OptimizerConfig adam = optim::default_config(optim::OptimizerKind::adam);
    adam.lr = cfg.train_lr;
    optim::OptimizerState state;

    std::vector<std::size_t> order(trajectories.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrajectoryView> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(trajectories[order[k]]);
            const BatchDraw draw = draw_batch(batch.size(), dim, cfg, rng);
            GfmLoss loss = gfm_loss(result.net, batch, cfg, draw);
            if (!std::isfinite(loss.total)) {
                const double t = draw.times.front();
                std::ostringstream msg;
                msg << "non-finite training loss at epoch " << epoch << " (t = " << t
                    << ", Z = " << (locate(t, cfg.m).index < cfg.n ? 1 : 0) << ")";
                throw NumericError(msg.str());
            }
            optim::apply_step(adam, state, result.net.params, loss.grad);
            epoch_loss += loss.total;
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

TrainResult train(const traj::TrajectoryDataset& dataset, const GfmConfig& cfg) {
    const auto views = dataset.views();
    return train(views, cfg);
}

std::string_view to_string(Integrator method) {
    return method == Integrator::midpoint ? "midpoint" : "euler";
}

Integrator parse_integrator(std::string_view text) {
    if (text == "midpoint") return Integrator::midpoint;
    if (text == "euler") return Integrator::euler;
    throw std::invalid_argument("unknown integrator '" + std::string(text) + "' (expected midpoint or euler)");
}

std::vector<double> forecast(const VectorFieldNet& net, std::span<const double> w_n,
                             const GfmConfig& cfg, const ForecastOptions& opts) {
    if (w_n.size() != net.dim()) throw ShapeError("forecast start does not match vector field dimension");
    return integrate(net, w_n, cfg.t_start(), opts).w;
}

}  // namespace gfm::flow
