#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fd_oracle.hpp"
#include "gfm/baselines.hpp"
#include "gfm/errors.hpp"
#include "gfm/rng.hpp"

using namespace gfm;
using namespace gfm::baselines;

namespace {

traj::TrajectoryDataset random_dataset(std::size_t count, std::size_t length, std::size_t dim, std::uint64_t seed) {
    traj::TrajectoryDataset ds(count, length, dim);
    Rng rng(seed);
    for (double& v : ds.data()) v = rng.normal();
    return ds;
}

// Smallest |hidden pre-activation| of the introspection net over a batch.
double kink_distance(const BaselineModel& model, std::span<const TrajectoryView> batch) {
    const auto spec = dense_spec(model.kind, model.dim);
    nn::Matrix xs(batch.size(), spec.input_dim);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        std::size_t col = 0;
        for (std::size_t k = model.n + 1 - kIntrospectionSteps; k <= model.n; ++k) {
            for (double v : batch[r].row(k)) xs(r, col++) = v;
        }
    }
    nn::Tape tape;
    nn::forward(spec, model.params, xs, tape);
    double closest = 1e300;
    for (double v : tape.pre_activation.front().values()) closest = std::min(closest, std::abs(v));
    return closest;
}

}  // namespace

TEST_CASE("names and shapes") {
    CHECK(parse_baseline("dlinear") == BaselineKind::dlinear);
    CHECK(to_string(BaselineKind::introspection) == "introspection");
    CHECK_THROWS(parse_baseline("lstm"));
    CHECK(param_count(BaselineKind::lfd2, 2, 4) == 2 * 2 * 2 + 2);
    CHECK(param_count(BaselineKind::introspection, 2, 4) == 8 * 100 + 100 + 100 * 2 + 2);
    CHECK(param_count(BaselineKind::dlinear, 2, 4) == 2 + 2 + 5 + 1 + 4 + 2);
    CHECK_THROWS(init_baseline(BaselineKind::introspection, 2, 2, 19, 0));
    CHECK_NOTHROW(init_baseline(BaselineKind::introspection, 2, 3, 19, 0));
    CHECK_THROWS(init_baseline(BaselineKind::lfd2, 2, 19, 19, 0));
}

TEST_CASE("lfd2 with a selector matrix returns w_n") {
    const auto ds = random_dataset(1, 20, 3, 1);
    auto model = init_baseline(BaselineKind::lfd2, 3, 4, 19, 0);
    std::fill(model.params.begin(), model.params.end(), 0.0);
    for (std::size_t o = 0; o < 3; ++o) model.params[(3 + o) * 3 + o] = 1.0;
    const auto pred = predict_baseline(model, ds.view(0));
    for (std::size_t c = 0; c < 3; ++c) CHECK(pred[c] == ds.row(0, 4)[c]);
}

TEST_CASE("lfd2 with [I | 0] returns w_0") {
    const auto ds = random_dataset(1, 20, 2, 1);
    auto model = init_baseline(BaselineKind::lfd2, 2, 4, 19, 0);
    std::fill(model.params.begin(), model.params.end(), 0.0);
    for (std::size_t o = 0; o < 2; ++o) model.params[o * 2 + o] = 1.0;
    const auto pred = predict_baseline(model, ds.view(0));
    for (std::size_t c = 0; c < 2; ++c) CHECK(pred[c] == ds.row(0, 0)[c]);
}

TEST_CASE("introspection with zero weights returns the output bias") {
    const auto ds = random_dataset(1, 20, 2, 1);
    auto model = init_baseline(BaselineKind::introspection, 2, 4, 19, 0);
    std::fill(model.params.begin(), model.params.end(), 0.0);
    model.params[model.params.size() - 2] = 0.5;
    model.params[model.params.size() - 1] = -1.5;
    CHECK(predict_baseline(model, ds.view(0)) == std::vector<double>{0.5, -1.5});
}

TEST_CASE("lfd2 fits w_m = 2 w_n - w_0 exactly") {
    auto ds = random_dataset(40, 20, 2, 2);
    for (std::size_t i = 0; i < ds.count(); ++i) {
        for (std::size_t c = 0; c < 2; ++c) ds.row(i, 19)[c] = 2.0 * ds.row(i, 4)[c] - ds.row(i, 0)[c];
    }
    const auto views = ds.views();
    BaselineConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 3000;
    cfg.batch_size = 40;
    const auto model = fit_baseline(BaselineKind::lfd2, views, 4, 19, cfg);
    CHECK(baseline_loss_and_grad(model, views).loss < 1e-8);
}

TEST_CASE("every kind fits constant trajectories") {
    traj::TrajectoryDataset ds(20, 10, 2);
    Rng rng(12);
    for (std::size_t i = 0; i < ds.count(); ++i) {
        const double a = rng.normal(), b = rng.normal();
        for (std::size_t k = 0; k < ds.length(); ++k) {
            ds.row(i, k)[0] = a;
            ds.row(i, k)[1] = b;
        }
    }
    const auto views = ds.views();
    BaselineConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 3000;
    cfg.batch_size = 20;
    for (const auto kind : {BaselineKind::lfd2, BaselineKind::introspection, BaselineKind::dlinear}) {
        INFO(to_string(kind));
        const auto model = fit_baseline(kind, views, 4, 9, cfg);
        CHECK(baseline_loss_and_grad(model, views).loss < 1e-6);
    }
}

TEST_CASE("dlinear with identity projections and a last-step selector is reversible") {
    const auto ds = random_dataset(3, 10, 3, 4);
    auto model = init_baseline(BaselineKind::dlinear, 3, 4, 9, 0);
    // temporal block follows scale and shift; select the last observed step
    for (std::size_t k = 0; k < 5; ++k) model.params[6 + k] = k == 4 ? 1.0 : 0.0;
    model.params[11] = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto pred = predict_baseline(model, ds.view(i));
        for (std::size_t c = 0; c < 3; ++c) CHECK(pred[c] == doctest::Approx(ds.row(i, 4)[c]).epsilon(1e-9));
    }
}

TEST_CASE("dlinear at initialization predicts the prefix mean") {
    const auto ds = random_dataset(1, 10, 2, 5);
    const auto model = init_baseline(BaselineKind::dlinear, 2, 4, 9, 0);
    const auto pred = predict_baseline(model, ds.view(0));
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (std::size_t k = 0; k < 5; ++k) mean += ds.row(0, k)[c] / 5.0;
        CHECK(pred[c] == doctest::Approx(mean).epsilon(1e-9));
    }
}

TEST_CASE("constant prefixes stay finite") {
    traj::TrajectoryDataset ds(2, 10, 2);
    std::fill(ds.data().begin(), ds.data().end(), 0.75);
    const auto views = ds.views();
    BaselineConfig cfg;
    cfg.epochs = 20;
    const auto model = fit_baseline(BaselineKind::dlinear, views, 4, 9, cfg);
    for (double x : predict_baseline(model, ds.view(0))) CHECK(std::isfinite(x));
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(31);
    for (const auto kind : {BaselineKind::lfd2, BaselineKind::introspection, BaselineKind::dlinear}) {
        for (int instance = 0; instance < 6;) {
            const std::size_t dim = 1 + rng.below(3);
            const std::size_t n = 3 + rng.below(4);
            const auto ds = random_dataset(1 + rng.below(4), n + 4, dim, rng.next_u64());
            const auto views = ds.views();
            auto model = init_baseline(kind, dim, n, n + 3, rng.next_u64());
            for (double& p : model.params) p += 0.3 * rng.normal();
            if (kind == BaselineKind::introspection && kink_distance(model, views) < 1e-3) continue;
            ++instance;
            const auto lg = baseline_loss_and_grad(model, views);
            INFO(to_string(kind), " instance ", instance);
            const auto fd = gfm_test::central_difference(
                [&](const std::vector<double>& p) {
                    BaselineModel probe = model;
                    probe.params = p;
                    return baseline_loss_and_grad(probe, views).loss;
                },
                model.params);
            CHECK(gfm_test::max_relative_error(lg.grad, fd) < 1e-4);
        }
    }
}

TEST_CASE("fitting is deterministic and reduces the loss") {
    const auto ds = random_dataset(12, 20, 2, 6);
    const auto views = ds.views();
    BaselineConfig cfg;
    cfg.epochs = 50;
    cfg.lr = 1e-3;
    for (const auto kind : {BaselineKind::lfd2, BaselineKind::introspection, BaselineKind::dlinear}) {
        const auto a = fit_baseline(kind, views, 4, 19, cfg);
        const auto b = fit_baseline(kind, views, 4, 19, cfg);
        CHECK(a == b);
        CHECK(a.loss_curve.back() < a.loss_curve.front());
    }
}

TEST_CASE("mismatched inputs") {
    const auto model = init_baseline(BaselineKind::lfd2, 2, 4, 19, 0);
    const auto wrong_dim = random_dataset(1, 20, 3, 7);
    CHECK_THROWS_AS(predict_baseline(model, wrong_dim.view(0)), ShapeError);
    const auto short_traj = random_dataset(1, 4, 2, 7);
    CHECK_THROWS_AS(predict_baseline(model, short_traj.view(0)), ShapeError);
    const auto no_target = random_dataset(1, 10, 2, 7);
    const auto views = no_target.views();
    CHECK_THROWS_AS(baseline_loss_and_grad(model, views), ShapeError);
}
