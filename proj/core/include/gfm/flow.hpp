#pragma once

// Optimizer-aware flow matching over weight trajectories: path construction,
// finite-difference target fields, the indicator-weighted CFM loss with a
// midpoint forecast-consistency penalty, mini-batch training, and ODE
// forecasting from the last observed weights.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gfm/errors.hpp"
#include "gfm/rng.hpp"
#include "gfm/smallnet.hpp"
#include "gfm/traj_gen.hpp"

namespace gfm::flow {

using traj::TrajectoryView;

struct GfmConfig {
    double beta = 1.0;    // weight of the observed-prefix term (Z = 1)
    double gamma = 1.0;   // weight of the extrapolation term (Z = 0)
    double zeta = 100.0;  // weight of the midpoint consistency penalty
    std::size_t n = 4;    // last observed index
    std::size_t m = 199;  // target index
    double sigma = 0.0;   // std of Gaussian noise added to path points
    double train_lr = 1e-4;
    std::size_t epochs = 1000;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    // One t per mini-batch (false) or one per sample (true).
    bool per_sample_t = false;
    // Extrapolation path runs w_n -> w_m over [n/m, 1] instead of w_0 -> w_m over [0, 1].
    bool bridge_from_last_observed = false;
    // Prefix weight beta * exp(-prefix_decay * (n - t m)); 0 disables.
    double prefix_decay = 0.0;
    // Only the last `prefix_window` prefix intervals carry weight; 0 disables.
    std::size_t prefix_window = 0;

    nn::InitScheme init = nn::InitScheme::xavier_normal;
    std::vector<std::size_t> hidden{64, 64, 64};

    double t_start() const { return static_cast<double>(n) / static_cast<double>(m); }
    void validate() const;

    friend bool operator==(const GfmConfig&, const GfmConfig&) = default;
};

/// Position of t on the index grid: t m = index + omega with omega in [0, 1).
/// Values of t m within a few ulps of an integer snap to it, so t = i / m
/// lands exactly on row i. t = 1 maps to (m, 0).
struct GridPosition {
    std::size_t index = 0;
    double omega = 0.0;
};
GridPosition locate(double t, std::size_t m);

/// (1 - omega) w_k + omega w_{k+1} with k = floor(t m); t = 1 returns w_m.
std::vector<double> interp_weights(const TrajectoryView& traj, double t, std::size_t m);

struct PathSample {
    double t = 0.0;
    double omega = 0.0;
    bool z = false;  // t < n / m
    std::vector<double> w_t;
    std::vector<double> v_target;
};

/// Prefix region: interpolated observed weights. Extrapolation region: the
/// bridge t w_m + (1 - t) w_0. `noise` (length D, already scaled by sigma)
/// is added when non-empty.
std::vector<double> path_point(const TrajectoryView& traj, double t, const GfmConfig& cfg,
                               std::span<const double> noise = {});

/// Prefix region: w_{k+1} - w_k. Extrapolation region: w_m - w_n.
std::vector<double> target_field(const TrajectoryView& traj, double t, const GfmConfig& cfg);

PathSample make_path_sample(const TrajectoryView& traj, double t, const GfmConfig& cfg,
                            std::span<const double> noise = {});

/// Loss weight of a sample: beta-derived for Z = 1, gamma for Z = 0.
double cfm_weight(const GfmConfig& cfg, const PathSample& sample);
/// cfm_weight * ||v_pred - v_target||^2
double cfm_loss(std::span<const double> v_pred, const PathSample& sample, const GfmConfig& cfg);

/// v_theta(w, t): a dense net on the concatenation (w, t).
struct VectorFieldNet {
    nn::NetSpec spec;
    std::vector<double> params;

    std::size_t dim() const { return spec.output_dim; }
    std::vector<double> operator()(std::span<const double> w, double t) const;
};

/// (D + 1) -> hidden (default 64, 64, 64, ELU) -> D, initialized per cfg.init.
VectorFieldNet make_vector_field(std::size_t dim, const GfmConfig& cfg);

/// Second-order midpoint step from (w_n, t_start) to t = 1:
///   mid = w_n + dt/2 v(w_n, t_start);  w_hat = w_n + dt v(mid, t_start + dt/2).
template <class Field>
std::vector<double> midpoint_predict(Field&& field, std::span<const double> w_n, double t_start) {
    const double dt = 1.0 - t_start;
    const std::vector<double> v1 = field(w_n, t_start);
    if (v1.size() != w_n.size()) throw ShapeError("vector field output does not match state dimension");
    std::vector<double> mid(w_n.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = w_n[i] + 0.5 * dt * v1[i];
    const std::vector<double> v2 = field(std::span<const double>(mid), t_start + 0.5 * dt);
    std::vector<double> out(w_n.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w_n[i] + dt * v2[i];
    return out;
}

std::vector<double> midpoint_predict(const VectorFieldNet& net, std::span<const double> w_n,
                                     const GfmConfig& cfg);

/// Per-batch randomness, drawn up front so the loss is a deterministic
/// function of (net, batch, draw).
struct BatchDraw {
    std::vector<double> times;               // one per sample
    std::vector<std::vector<double>> noise;  // empty when sigma == 0
};
BatchDraw draw_batch(std::size_t batch_size, std::size_t dim, const GfmConfig& cfg, Rng& rng);

struct GfmLoss {
    double total = 0.0;  // batch mean of cfm + zeta * pred
    double cfm = 0.0;    // batch mean of the weighted CFM term
    double pred = 0.0;   // batch mean of ||w_hat_m - w_m||^2
    std::vector<double> grad;
};

/// Loss and exact gradient w.r.t. the net parameters. The consistency term
/// is differentiated through both vector-field evaluations of the midpoint step.
GfmLoss gfm_loss(const VectorFieldNet& net, std::span<const TrajectoryView> batch,
                 const GfmConfig& cfg, const BatchDraw& draw);
GfmLoss gfm_total_loss(const VectorFieldNet& net, std::span<const TrajectoryView> batch,
                       const GfmConfig& cfg, Rng& rng);

struct TrainResult {
    VectorFieldNet net;
    std::vector<double> loss_curve;  // mean mini-batch loss per epoch
};

/// Adam(train_lr) over epochs x ceil(N / batch_size) shuffled mini-batches.
TrainResult train(std::span<const TrajectoryView> trajectories, const GfmConfig& cfg);
TrainResult train(const traj::TrajectoryDataset& dataset, const GfmConfig& cfg);

enum class Integrator { midpoint, euler };
std::string_view to_string(Integrator method);
Integrator parse_integrator(std::string_view text);

struct ForecastOptions {
    Integrator method = Integrator::midpoint;
    double h = 0.0;              // step in normalized time; 0 -> (1 - t_start) / substeps
    double tau = 1e-6;           // early stop when the step displacement norm < tau
    std::size_t max_steps = 0;   // 0 -> ceil((1 - t_start) / h)
    std::size_t default_substeps = 0;  // 0 -> 1 for midpoint, 64 for euler
    bool record_path = false;

    std::size_t substeps() const {
        if (default_substeps > 0) return default_substeps;
        return method == Integrator::midpoint ? 1 : 64;
    }

    friend bool operator==(const ForecastOptions&, const ForecastOptions&) = default;
};

struct ForecastTrace {
    std::vector<double> w;
    std::size_t steps = 0;
    double t_end = 0.0;
    bool early_stopped = false;
    std::vector<std::vector<double>> path;  // states visited, when requested
};

/// Integrates dw/dt = v(w, t) from t_start toward t = 1 with explicit Euler
/// or the explicit midpoint rule. The last step is shortened so the state
/// lands on t = 1 exactly. A single midpoint step over the whole span is the
/// same map as midpoint_predict.
template <class Field>
ForecastTrace integrate(Field&& field, std::span<const double> w_start, double t_start,
                        const ForecastOptions& opts) {
    const double span_t = 1.0 - t_start;
    const double h = opts.h > 0.0 ? opts.h : span_t / static_cast<double>(opts.substeps());
    if (!(h > 0.0) || !(opts.tau > 0.0)) throw std::invalid_argument("forecast needs h > 0 and tau > 0");
    const std::size_t max_steps = opts.max_steps > 0
        ? opts.max_steps
        : static_cast<std::size_t>(std::ceil(span_t / h - 1e-9));

    ForecastTrace trace;
    trace.w.assign(w_start.begin(), w_start.end());
    if (opts.record_path) trace.path.push_back(trace.w);
    std::vector<double> mid(trace.w.size());
    double t = t_start;
    for (std::size_t k = 0; k < max_steps && t < 1.0; ++k) {
        const bool last = k + 1 == max_steps || t + h > 1.0;
        const double step = last ? 1.0 - t : h;
        std::vector<double> v = field(std::span<const double>(trace.w), t);
        if (v.size() != trace.w.size()) throw ShapeError("vector field output does not match state dimension");
        if (opts.method == Integrator::midpoint) {
            for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = trace.w[i] + 0.5 * step * v[i];
            v = field(std::span<const double>(mid), t + 0.5 * step);
            if (v.size() != trace.w.size()) throw ShapeError("vector field output does not match state dimension");
        }
        double norm2 = 0.0;
        for (double x : v) norm2 += (step * x) * (step * x);
        if (std::sqrt(norm2) < opts.tau) {
            trace.early_stopped = true;
            break;
        }
        for (std::size_t i = 0; i < v.size(); ++i) trace.w[i] += step * v[i];
        for (double x : trace.w) {
            if (!std::isfinite(x)) throw NumericError("forecast state became non-finite at t = " + std::to_string(t));
        }
        t = last ? 1.0 : t + h;
        ++trace.steps;
        if (opts.record_path) trace.path.push_back(trace.w);
    }
    trace.t_end = t;
    return trace;
}

/// Forecast of w_m from w_n, integrating the learned field over [n/m, 1].
std::vector<double> forecast(const VectorFieldNet& net, std::span<const double> w_n,
                             const GfmConfig& cfg, const ForecastOptions& opts = {});

}  // namespace gfm::flow
