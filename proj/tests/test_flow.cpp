#include <doctest.h>

#include <cmath>

#include "fd_oracle.hpp"
#include "gfm/flow.hpp"
#include "gfm/rng.hpp"

using namespace gfm;
using namespace gfm::flow;

namespace {

traj::TrajectoryDataset random_dataset(std::size_t count, std::size_t length, std::size_t dim, std::uint64_t seed) {
    traj::TrajectoryDataset ds(count, length, dim);
    Rng rng(seed);
    for (double& v : ds.data()) v = rng.normal();
    return ds;
}

GfmConfig small_config(std::size_t n, std::size_t m) {
    GfmConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.hidden = {6, 5};
    return cfg;
}

// Loss recomputed one sample at a time from the public pieces.
double reference_loss(const VectorFieldNet& net, std::span<const TrajectoryView> batch, const GfmConfig& cfg,
                      const BatchDraw& draw) {
    double total = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto sample = make_path_sample(batch[j], draw.times[j], cfg,
                                             draw.noise.empty() ? std::span<const double>{} : draw.noise[j]);
        total += cfm_loss(net(sample.w_t, sample.t), sample, cfg);
        const auto w_hat = midpoint_predict(net, batch[j].row(cfg.n), cfg);
        double sq = 0.0;
        for (std::size_t i = 0; i < w_hat.size(); ++i) {
            const double e = w_hat[i] - batch[j].row(cfg.m)[i];
            sq += e * e;
        }
        total += cfg.zeta * sq;
    }
    return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("locate snaps grid times onto rows") {
    for (std::size_t m : {1u, 7u, 199u}) {
        for (std::size_t i = 0; i <= m; ++i) {
            const auto pos = locate(static_cast<double>(i) / static_cast<double>(m), m);
            CHECK(pos.index == i);
            CHECK(pos.omega == 0.0);
        }
    }
    const auto pos = locate(0.55, 10);
    CHECK(pos.index == 5);
    CHECK(pos.omega == doctest::Approx(0.5));
    CHECK_THROWS(locate(1.5, 10));
    CHECK_THROWS(locate(-0.1, 10));
}

TEST_CASE("interpolation hits recorded rows and is linear between them") {
    const auto ds = random_dataset(1, 11, 3, 1);
    const auto view = ds.view(0);
    for (std::size_t i = 0; i <= 10; ++i) {
        const auto w = interp_weights(view, static_cast<double>(i) / 10.0, 10);
        for (std::size_t k = 0; k < 3; ++k) CHECK(w[k] == view.row(i)[k]);
    }
    const auto w = interp_weights(view, 0.325, 10);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(w[k] == doctest::Approx(0.75 * view.row(3)[k] + 0.25 * view.row(4)[k]).epsilon(1e-13));
    }
}

TEST_CASE("path point and target field by region") {
    const auto ds = random_dataset(1, 21, 2, 2);
    const auto view = ds.view(0);
    const auto cfg = small_config(5, 20);

    SUBCASE("prefix: interpolated weights and the forward difference") {
        const double t = 3.4 / 20.0;
        const auto s = make_path_sample(view, t, cfg);
        CHECK(s.z);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(s.w_t[k] == doctest::Approx(0.6 * view.row(3)[k] + 0.4 * view.row(4)[k]).epsilon(1e-13));
            CHECK(s.v_target[k] == view.row(4)[k] - view.row(3)[k]);
        }
    }
    SUBCASE("t = n / m already belongs to the extrapolation region") {
        const auto s = make_path_sample(view, 5.0 / 20.0, cfg);
        CHECK_FALSE(s.z);
    }
    SUBCASE("extrapolation: straight bridge from w_0 and w_m - w_n") {
        const double t = 0.7;
        const auto s = make_path_sample(view, t, cfg);
        CHECK_FALSE(s.z);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(s.w_t[k] == doctest::Approx(t * view.row(20)[k] + (1 - t) * view.row(0)[k]).epsilon(1e-13));
            CHECK(s.v_target[k] == view.row(20)[k] - view.row(5)[k]);
        }
        CHECK(cfm_weight(cfg, s) == cfg.gamma);
    }
    SUBCASE("t = 1 gives w_m") {
        const auto w = path_point(view, 1.0, cfg);
        for (std::size_t k = 0; k < 2; ++k) CHECK(w[k] == view.row(20)[k]);
    }
    SUBCASE("noise is added to the path point only") {
        const std::vector<double> noise{0.5, -0.25};
        const auto clean = make_path_sample(view, 0.9, cfg);
        const auto noisy = make_path_sample(view, 0.9, cfg, noise);
        CHECK(noisy.w_t[0] == clean.w_t[0] + 0.5);
        CHECK(noisy.w_t[1] == clean.w_t[1] - 0.25);
        CHECK(noisy.v_target == clean.v_target);
    }
    SUBCASE("short trajectories are rejected") {
        const auto tiny = random_dataset(1, 20, 2, 3);
        CHECK_THROWS_AS(path_point(tiny.view(0), 0.5, cfg), ShapeError);
    }
}

TEST_CASE("with n = 0 every sample is the plain bridge with target w_m - w_0") {
    const auto ds = random_dataset(1, 9, 2, 4);
    const auto view = ds.view(0);
    const auto cfg = small_config(0, 8);
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        const double t = rng.uniform();
        const auto s = make_path_sample(view, t, cfg);
        CHECK_FALSE(s.z);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(s.w_t[i] == doctest::Approx((1 - t) * view.row(0)[i] + t * view.row(8)[i]).epsilon(1e-13));
            CHECK(s.v_target[i] == view.row(8)[i] - view.row(0)[i]);
        }
    }
}

TEST_CASE("prefix weight options") {
    const auto ds = random_dataset(1, 21, 1, 6);
    auto cfg = small_config(10, 20);
    cfg.beta = 2.0;
    const auto s = make_path_sample(ds.view(0), 4.0 / 20.0, cfg);  // six steps before n
    CHECK(cfm_weight(cfg, s) == 2.0);
    cfg.prefix_decay = 0.5;
    CHECK(cfm_weight(cfg, s) == doctest::Approx(2.0 * std::exp(-3.0)));
    cfg.prefix_decay = 0.0;
    cfg.prefix_window = 3;
    CHECK(cfm_weight(cfg, s) == 0.0);
}

TEST_CASE("one midpoint step on dw/dt = lambda w matches the second-order Taylor map") {
    for (double lambda : {-2.0, -0.3, 0.7, 1.5}) {
        for (double t0 : {0.0, 0.2, 0.9}) {
            const auto field = [lambda](std::span<const double> w, double) {
                std::vector<double> v(w.begin(), w.end());
                for (double& x : v) x *= lambda;
                return v;
            };
            const std::vector<double> w0{1.3, -0.4};
            const double a = lambda * (1.0 - t0);
            const auto w = midpoint_predict(field, w0, t0);
            for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(w[i] - w0[i] * (1 + a + 0.5 * a * a)) < 1e-12);
        }
    }
}

TEST_CASE("euler converges at first order on dw/dt = -w") {
    const double lambda = -1.0;
    const auto field = [lambda](std::span<const double> w, double) {
        return std::vector<double>{lambda * w[0]};
    };
    const double exact = std::exp(lambda);
    double prev_err = 0.0;
    for (std::size_t substeps : {16u, 32u, 64u, 128u}) {
        ForecastOptions opts;
        opts.method = Integrator::euler;
        opts.default_substeps = substeps;
        opts.tau = 1e-300;
        const auto trace = integrate(field, std::vector<double>{1.0}, 0.0, opts);
        CHECK(trace.steps == substeps);
        CHECK(trace.t_end == 1.0);
        const double err = std::abs(trace.w[0] - exact);
        if (prev_err > 0.0) CHECK(prev_err / err == doctest::Approx(2.0).epsilon(0.2));
        prev_err = err;
    }
}

TEST_CASE("integrator edge cases") {
    SUBCASE("constant field is integrated exactly and the last step is shortened") {
        const auto field = [](std::span<const double>, double) { return std::vector<double>{0.5, -1.0}; };
        ForecastOptions opts;
        opts.method = Integrator::euler;
        opts.h = 0.3;
        const auto trace = integrate(field, std::vector<double>{0.0, 0.0}, 0.2, opts);
        CHECK(trace.steps == 3);
        CHECK(trace.t_end == 1.0);
        CHECK(trace.w[0] == doctest::Approx(0.4).epsilon(1e-14));
        CHECK(trace.w[1] == doctest::Approx(-0.8).epsilon(1e-14));
    }
    SUBCASE("zero field stops early without moving") {
        const auto field = [](std::span<const double> w, double) { return std::vector<double>(w.size(), 0.0); };
        ForecastOptions opts;
        opts.record_path = true;
        const auto trace = integrate(field, std::vector<double>{1.0, 2.0}, 0.1, opts);
        CHECK(trace.early_stopped);
        CHECK(trace.steps == 0);
        CHECK(trace.w == std::vector<double>{1.0, 2.0});
        CHECK(trace.path.size() == 1);
    }
    SUBCASE("blow-up raises a numeric error") {
        const auto field = [](std::span<const double> w, double) {
            return std::vector<double>{w[0] * 1e300};
        };
        ForecastOptions opts;
        opts.method = Integrator::euler;
        CHECK_THROWS_AS(integrate(field, std::vector<double>{1e10}, 0.0, opts), NumericError);
    }
    SUBCASE("max_steps caps the integration") {
        const auto field = [](std::span<const double>, double) { return std::vector<double>{1.0}; };
        ForecastOptions opts;
        opts.method = Integrator::euler;
        opts.h = 0.1;
        opts.max_steps = 2;
        opts.record_path = true;
        const auto trace = integrate(field, std::vector<double>{0.0}, 0.0, opts);
        CHECK(trace.t_end == 1.0);
        CHECK(trace.path.size() == 3);
        CHECK(trace.w[0] == doctest::Approx(1.0));
    }
    SUBCASE("integrator names") {
        CHECK(parse_integrator("euler") == Integrator::euler);
        CHECK(to_string(Integrator::midpoint) == "midpoint");
        CHECK_THROWS(parse_integrator("rk4"));
    }
}

TEST_CASE("default forecast is the single midpoint step") {
    const auto cfg = small_config(4, 19);
    const auto net = make_vector_field(3, cfg);
    const std::vector<double> w{0.2, -0.7, 1.1};
    const auto a = forecast(net, w, cfg);
    const auto b = midpoint_predict(net, w, cfg);
    CHECK(a == b);
}

TEST_CASE("vector field shape") {
    GfmConfig cfg;
    const auto net = make_vector_field(2, cfg);
    CHECK(net.spec.input_dim == 3);
    CHECK(net.spec.output_dim == 2);
    CHECK(net.spec.hidden_sizes == std::vector<std::size_t>{64, 64, 64});
    CHECK(net.spec.activation == nn::Activation::elu);
    CHECK(net(std::vector<double>{0.0, 0.0}, 0.5).size() == 2);
    CHECK_THROWS_AS(net(std::vector<double>{0.0}, 0.5), ShapeError);
}

TEST_CASE("gfm_loss agrees with the per-sample reference and with central differences") {
    Rng rng(99);
    for (int instance = 0; instance < 20; ++instance) {
        const std::size_t dim = 1 + rng.below(3);
        const std::size_t m = 6 + rng.below(10);
        auto cfg = small_config(rng.below(m), m);
        cfg.beta = rng.uniform(0.0, 2.0);
        cfg.gamma = rng.uniform(0.0, 2.0);
        cfg.zeta = rng.uniform(0.0, 5.0);
        cfg.per_sample_t = instance % 2 == 0;
        cfg.sigma = instance % 3 == 0 ? 0.1 : 0.0;
        cfg.init = nn::InitScheme::std_normal;
        cfg.seed = rng.next_u64();
        const auto ds = random_dataset(1 + rng.below(5), m + 1, dim, rng.next_u64());
        const auto views = ds.views();
        auto net = make_vector_field(dim, cfg);
        for (double& p : net.params) p *= 0.5;
        const auto draw = draw_batch(views.size(), dim, cfg, rng);

        const auto loss = gfm_loss(net, views, cfg, draw);
        CHECK(loss.total == doctest::Approx(reference_loss(net, views, cfg, draw)).epsilon(1e-12));
        const auto fd = gfm_test::central_difference(
            [&](const std::vector<double>& p) {
                VectorFieldNet probe{net.spec, p};
                return reference_loss(probe, views, cfg, draw);
            },
            net.params);
        CHECK(gfm_test::max_relative_error(loss.grad, fd) < 1e-4);
    }
}

TEST_CASE("loss reductions") {
    const auto ds = random_dataset(4, 12, 2, 7);
    const auto views = ds.views();
    auto cfg = small_config(3, 11);
    const auto net = make_vector_field(2, cfg);
    Rng rng(1);
    const auto draw = draw_batch(4, 2, cfg, rng);

    SUBCASE("zeta = 0 leaves the flow-matching term") {
        cfg.zeta = 0.0;
        const auto loss = gfm_loss(net, views, cfg, draw);
        CHECK(loss.total == loss.cfm);
        CHECK(loss.pred > 0.0);
    }
    SUBCASE("beta = gamma = 0 leaves the consistency term") {
        cfg.beta = 0.0;
        cfg.gamma = 0.0;
        const auto loss = gfm_loss(net, views, cfg, draw);
        CHECK(loss.cfm == 0.0);
        CHECK(loss.total == cfg.zeta * loss.pred);
    }
    SUBCASE("scaling every weight scales loss and gradient") {
        const auto base = gfm_loss(net, views, cfg, draw);
        GfmConfig scaled = cfg;
        scaled.beta *= 4.0;
        scaled.gamma *= 4.0;
        scaled.zeta *= 4.0;
        const auto big = gfm_loss(net, views, scaled, draw);
        CHECK(big.total == doctest::Approx(4.0 * base.total).epsilon(1e-14));
        for (std::size_t i = 0; i < base.grad.size(); ++i) {
            CHECK(big.grad[i] == doctest::Approx(4.0 * base.grad[i]).epsilon(1e-12));
        }
    }
    SUBCASE("draws are one t per batch unless per_sample_t") {
        Rng r(3);
        const auto shared = draw_batch(5, 2, cfg, r);
        for (double t : shared.times) CHECK(t == shared.times[0]);
        cfg.per_sample_t = true;
        const auto own = draw_batch(5, 2, cfg, r);
        CHECK(own.times[0] != own.times[1]);
    }
}

TEST_CASE("training") {
    const auto ds = random_dataset(10, 12, 2, 8);
    auto cfg = small_config(3, 11);
    cfg.batch_size = 4;

    SUBCASE("zero epochs return the initialization") {
        cfg.epochs = 0;
        const auto result = train(ds, cfg);
        CHECK(result.net.params == make_vector_field(2, cfg).params);
        CHECK(result.loss_curve.empty());
    }
    SUBCASE("deterministic per seed") {
        cfg.epochs = 5;
        const auto a = train(ds, cfg);
        const auto b = train(ds, cfg);
        CHECK(a.net.params == b.net.params);
        CHECK(a.loss_curve == b.loss_curve);
        CHECK(a.loss_curve.size() == 5);
        cfg.seed = 1;
        CHECK(train(ds, cfg).net.params != a.net.params);
    }
    SUBCASE("loss decreases on a learnable set") {
        cfg.epochs = 300;
        cfg.train_lr = 1e-2;
        const auto result = train(ds, cfg);
        CHECK(result.loss_curve.back() < result.loss_curve.front());
    }
    SUBCASE("invalid configs") {
        cfg.n = 11;
        CHECK_THROWS(train(ds, cfg));
        cfg.n = 3;
        cfg.batch_size = 0;
        CHECK_THROWS(train(ds, cfg));
    }
}
