#include <doctest.h>

#include <cmath>
#include <limits>

#include "fd_oracle.hpp"
#include "gfm/errors.hpp"
#include "gfm/rng.hpp"
#include "gfm/smallnet.hpp"

using namespace gfm;
using namespace gfm::nn;

TEST_CASE("param_count sums fan_in * fan_out + fan_out per layer") {
    CHECK(param_count({1, {}, 1, Activation::identity}) == 2);
    CHECK(param_count({1, {2, 2, 1}, 1, Activation::relu}) == 15);
    CHECK(param_count({1, {4, 1}, 1, Activation::relu}) == 15);
    CHECK(param_count({3, {64, 64, 64}, 2, Activation::elu}) == 3 * 64 + 64 + 2 * (64 * 64 + 64) + 64 * 2 + 2);
}

TEST_CASE("layout offsets are contiguous and cover the vector") {
    const NetSpec spec{3, {5, 4}, 2, Activation::elu};
    const auto layout = param_layout(spec);
    REQUIRE(layout.size() == 3);
    std::size_t expect = 0;
    for (const auto& slot : layout) {
        CHECK(slot.weight_offset == expect);
        CHECK(slot.bias_offset == expect + slot.fan_in * slot.fan_out);
        expect = slot.bias_offset + slot.fan_out;
    }
    CHECK(expect == param_count(spec));
}

TEST_CASE("flatten(unflatten(p)) is bit-exact") {
    const NetSpec spec{2, {3, 3}, 2, Activation::relu};
    const auto p = init_params(spec, InitScheme::std_normal, 17);
    CHECK(flatten(spec, unflatten(spec, p)) == p);
}

TEST_CASE("init schemes") {
    const NetSpec one{1, {}, 1, Activation::identity};
    SUBCASE("xavier_uniform is bounded by sqrt(6 / (fan_in + fan_out))") {
        for (std::uint64_t s = 0; s < 200; ++s) {
            const auto p = init_params(one, InitScheme::xavier_uniform, s);
            CHECK(std::abs(p[0]) <= std::sqrt(3.0));
            CHECK(p[1] == 0.0);
        }
    }
    SUBCASE("xavier_normal weight variance is 2 / (fan_in + fan_out)") {
        const NetSpec wide{50, {}, 50, Activation::identity};
        const auto p = init_params(wide, InitScheme::xavier_normal, 3);
        double ss = 0.0;
        for (std::size_t i = 0; i < 2500; ++i) ss += p[i] * p[i];
        CHECK(ss / 2500.0 == doctest::Approx(2.0 / 100.0).epsilon(0.1));
        for (std::size_t i = 2500; i < p.size(); ++i) CHECK(p[i] == 0.0);
    }
    SUBCASE("std_normal draws biases too") {
        const auto p = init_params({1, {8}, 1, Activation::relu}, InitScheme::std_normal, 4);
        bool nonzero_bias = false;
        for (std::size_t i = 8; i < 16; ++i) nonzero_bias = nonzero_bias || p[i] != 0.0;
        CHECK(nonzero_bias);
    }
    SUBCASE("deterministic per seed") {
        const NetSpec spec{2, {4}, 1, Activation::relu};
        CHECK(init_params(spec, InitScheme::xavier_normal, 9) == init_params(spec, InitScheme::xavier_normal, 9));
        CHECK(init_params(spec, InitScheme::xavier_normal, 9) != init_params(spec, InitScheme::xavier_normal, 10));
    }
}

TEST_CASE("forward on hand-built networks") {
    SUBCASE("affine 1 -> 1") {
        const NetSpec spec{1, {}, 1, Activation::identity};
        const std::vector<double> p{2.0, 1.0};
        CHECK(forward(spec, p, std::vector<double>{3.0})[0] == 7.0);
    }
    SUBCASE("identity blocks") {
        const NetSpec spec{1, {1}, 1, Activation::identity};
        const std::vector<double> p{1.0, 0.0, 1.0, 0.0};
        CHECK(forward(spec, p, std::vector<double>{1.0})[0] == 1.0);
    }
    SUBCASE("dead relu layer leaves the output bias") {
        const NetSpec spec{1, {2}, 1, Activation::relu};
        // hidden pre-activations -x - 1 < 0 for x = 2
        const std::vector<double> p{-1.0, -1.0, -1.0, -1.0, 5.0, 5.0, 0.25};
        CHECK(forward(spec, p, std::vector<double>{2.0})[0] == 0.25);
    }
    SUBCASE("elu uses alpha = 1") {
        const NetSpec spec{1, {1}, 1, Activation::elu};
        const std::vector<double> p{1.0, 0.0, 1.0, 0.0};
        CHECK(forward(spec, p, std::vector<double>{-2.0})[0] == doctest::Approx(std::expm1(-2.0)));
    }
    SUBCASE("dimension mismatch throws") {
        const NetSpec spec{2, {}, 1, Activation::identity};
        CHECK_THROWS_AS(forward(spec, std::vector<double>(3, 0.0), std::vector<double>{1.0}), ShapeError);
    }
}

TEST_CASE("loss_and_grad hand values") {
    const NetSpec spec{1, {}, 1, Activation::identity};
    Matrix xs(1, 1, 1.0), ys(1, 1, 2.0);
    const auto lg = loss_and_grad(spec, std::vector<double>{0.0, 0.0}, xs, ys);
    CHECK(lg.loss == 4.0);
    CHECK(lg.grad[0] == -4.0);
    CHECK(lg.grad[1] == -4.0);
    CHECK_THROWS(loss_and_grad(spec, std::vector<double>{0.0, 0.0}, Matrix(0, 1), Matrix(0, 1)));
}

TEST_CASE("gradient is zero at the least-squares optimum of a noiseless line") {
    const NetSpec spec{1, {}, 1, Activation::identity};
    Matrix xs(5, 1), ys(5, 1);
    for (std::size_t i = 0; i < 5; ++i) {
        xs(i, 0) = -1.0 + 0.5 * static_cast<double>(i);
        ys(i, 0) = 2.0 * xs(i, 0) + 1.0;
    }
    const auto lg = loss_and_grad(spec, std::vector<double>{2.0, 1.0}, xs, ys);
    CHECK(std::abs(lg.grad[0]) < 1e-14);
    CHECK(std::abs(lg.grad[1]) < 1e-14);
}

namespace {

// Smallest |pre-activation| over hidden layers, to keep relu samples off kinks.
double kink_distance(const NetSpec& spec, std::span<const double> p, const Matrix& xs) {
    Tape tape;
    forward(spec, p, xs, tape);
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < tape.pre_activation.size(); ++l) {
        for (double v : tape.pre_activation[l].values()) closest = std::min(closest, std::abs(v));
    }
    return closest;
}

}  // namespace

TEST_CASE("analytic gradients match central differences on 100 random instances") {
    Rng rng(2024);
    int checked = 0;
    for (const auto act : {Activation::identity, Activation::relu, Activation::elu}) {
        int done = 0;
        while (done < 34) {
            NetSpec spec;
            spec.input_dim = 1 + rng.below(3);
            spec.output_dim = 1 + rng.below(3);
            spec.activation = act;
            const auto depth = rng.below(3);
            for (std::uint64_t k = 0; k < depth; ++k) spec.hidden_sizes.push_back(1 + rng.below(5));
            const auto params = init_params(spec, InitScheme::std_normal, rng.next_u64());
            const std::size_t batch = 1 + rng.below(6);
            Matrix xs(batch, spec.input_dim), ys(batch, spec.output_dim);
            for (double& v : xs.values()) v = rng.normal();
            for (double& v : ys.values()) v = rng.normal();
            if (act == Activation::relu && kink_distance(spec, params, xs) < 1e-3) continue;

            const auto lg = loss_and_grad(spec, params, xs, ys);
            REQUIRE(lg.grad.size() == param_count(spec));
            const auto fd = gfm_test::central_difference(
                [&](const std::vector<double>& p) { return mse_loss(spec, p, xs, ys); }, params);
            CHECK(gfm_test::max_relative_error(lg.grad, fd) < 1e-4);
            ++done;
            ++checked;
        }
    }
    CHECK(checked >= 100);
}
