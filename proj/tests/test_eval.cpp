#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gfm/eval.hpp"

using namespace gfm;
using namespace gfm::eval;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.models = {ModelKind::gfm, ModelKind::lfd2};
    cfg.optimizers = {optim::OptimizerKind::sgd, optim::OptimizerKind::adagrad};
    cfg.seeds = {0, 1};
    cfg.n_traj = 10;
    cfg.gfm.epochs = 3;
    cfg.gfm.hidden = {8};
    cfg.baseline.epochs = 3;
    return cfg;
}

}  // namespace

TEST_CASE("split sizes and partition") {
    const auto s = split_indices(50, 0.6, 3);
    CHECK(s.train.size() == 30);
    CHECK(s.test.size() == 20);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(50);
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    CHECK(all == expect);
    CHECK(split_indices(50, 0.6, 3).train == s.train);
    CHECK(split_indices(50, 0.6, 4).train != s.train);
    CHECK(split_indices(7, 0.5, 0).train.size() == 4);
    CHECK_THROWS(split_indices(10, 1.5, 0));
}

TEST_CASE("split_dataset keeps rows") {
    const auto ds = traj::generate_linreg_trajectories(optim::default_config(optim::OptimizerKind::sgd), 10, 1,
                                                       nn::InitScheme::std_normal, {20, 1});
    const auto [train, test] = split_dataset(ds, 0.6, 2);
    const auto s = split_indices(10, 0.6, 2);
    CHECK(train.count() == 6);
    CHECK(test.count() == 4);
    const auto a = test.view(1).values();
    const auto b = ds.view(s.test[1]).values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST_CASE("metrics") {
    CHECK(mse(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 4.0}) == 2.5);
    CHECK_THROWS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}));
    CHECK(mean(std::vector<double>{1.0, 2.0, 6.0}) == 3.0);
    CHECK(sample_std(std::vector<double>{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) ==
          doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("f_source is the task MSE") {
    traj::RegressionTask task;
    task.xs = {0.0, 1.0};
    task.ys = {1.0, 3.0};
    CHECK(f_source(traj::linreg_spec(), std::vector<double>{2.0, 1.0}, task) == 0.0);
    CHECK(f_source(traj::linreg_spec(), std::vector<double>{0.0, 0.0}, task) == 5.0);
}

TEST_CASE("best configs") {
    const auto a = best_config(optim::OptimizerKind::adam);
    CHECK(a.beta == 0.0);
    CHECK(a.gamma == 0.1);
    CHECK(a.zeta == 1.0);
    const auto g = best_config(optim::OptimizerKind::adagrad);
    CHECK(g.beta == 0.1);
    CHECK(g.gamma == 1.0);
    CHECK(g.zeta == 100.0);
    CHECK(best_config(optim::OptimizerKind::sgd).zeta == 10.0);
}

TEST_CASE("sweep grid") {
    const auto grid = SweepGrid::full();
    CHECK(grid.size() == 64);
    CHECK(grid.betas == std::vector<double>{0.0, 0.1, 1.0, 10.0});
    CHECK(grid.zetas == std::vector<double>{0.0, 1.0, 10.0, 100.0});
}

TEST_CASE("config JSON round trip") {
    auto cfg = tiny_config();
    cfg.forecast.method = flow::Integrator::euler;
    cfg.gfm.beta = 0.1;
    const auto text = config_json(cfg);
    const auto back = config_from_json(text);
    CHECK(config_json(back) == text);
    CHECK(back.gfm == cfg.gfm);
    CHECK(back.forecast == cfg.forecast);
    CHECK(back.models == cfg.models);
    CHECK_THROWS(config_from_json("{\"n_traj\": \"many\"}"));
}

TEST_CASE("experiment grid") {
    const auto cfg = tiny_config();
    const auto report = run_experiment(cfg);
    CHECK(report.cells.size() == 2 * 2 * 2);
    REQUIRE(report.results.size() == 4);
    CHECK(report.results[0].model == ModelKind::gfm);
    CHECK(report.results[0].optimizer == optim::OptimizerKind::sgd);
    for (const auto& r : report.results) {
        CHECK(r.per_seed_mse.size() == 2);
        CHECK(r.mean == doctest::Approx(mean(r.per_seed_mse)));
        CHECK(r.std == doctest::Approx(sample_std(r.per_seed_mse)));
    }
    for (const auto& c : report.cells) {
        CHECK(std::isfinite(c.test_mse));
        CHECK(c.f_source >= 0.0);
        CHECK(c.gfm.seed == c.seed);
    }

    SUBCASE("independent of jobs") {
        auto parallel = cfg;
        parallel.jobs = 3;
        CHECK(cells_csv(run_experiment(parallel)) == cells_csv(report));
    }
    SUBCASE("a cell can be rerun alone") {
        const auto cell = run_cell(cfg, ModelKind::lfd2, optim::OptimizerKind::adagrad, 1);
        const auto it = std::find_if(report.cells.begin(), report.cells.end(), [](const CellResult& c) {
            return c.model == ModelKind::lfd2 && c.optimizer == optim::OptimizerKind::adagrad && c.seed == 1;
        });
        REQUIRE(it != report.cells.end());
        CHECK(cell.test_mse == it->test_mse);
    }
    SUBCASE("csv layout") {
        const auto csv = cells_csv(report);
        CHECK(csv.rfind("model,optimizer,beta,gamma,zeta,n,m,seed,test_mse,f_source\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
        const auto json = report_json(report);
        CHECK(json.find("\"results\"") != std::string::npos);
    }
}

TEST_CASE("a one-point sweep equals the plain GFM experiment") {
    auto cfg = tiny_config();
    cfg.models = {ModelKind::gfm};
    cfg.seeds = {0};
    cfg.gfm.beta = 0.1;
    cfg.gfm.gamma = 1.0;
    cfg.gfm.zeta = 10.0;
    const auto sweep = sensitivity_sweep({{0.1}, {1.0}, {10.0}}, cfg);
    const auto plain = run_experiment(cfg);
    REQUIRE(sweep.results.size() == plain.results.size());
    for (std::size_t i = 0; i < sweep.results.size(); ++i) {
        CHECK(sweep.results[i].mean == plain.results[i].mean);
        CHECK(sweep.results[i].best);
    }
}

TEST_CASE("sweep flags one best per optimizer") {
    auto cfg = tiny_config();
    cfg.models = {ModelKind::gfm};
    cfg.seeds = {0};
    const auto sweep = sensitivity_sweep({{0.0, 1.0}, {1.0}, {0.0, 10.0}}, cfg);
    CHECK(sweep.results.size() == 2 * 2 * 2);
    for (const auto kind : cfg.optimizers) {
        int flagged = 0;
        double best = INFINITY;
        double flagged_mean = 0.0;
        for (const auto& r : sweep.results) {
            if (r.optimizer != kind) continue;
            best = std::min(best, r.mean);
            if (r.best) {
                ++flagged;
                flagged_mean = r.mean;
            }
        }
        CHECK(flagged == 1);
        CHECK(flagged_mean == best);
    }
}

TEST_CASE("generalization preset on a small budget") {
    GeneralizationConfig cfg;
    cfg.optimizers = {optim::OptimizerKind::sgd};
    cfg.gfm.epochs = 2;
    cfg.gfm.hidden = {8};
    const auto results = run_generalization(cfg);
    REQUIRE(results.size() == 1);
    CHECK(results[0].f_source.size() == 20);
    CHECK(results[0].recorded_final.size() == 20);
    CHECK(results[0].median_recorded_final == median(results[0].recorded_final));
    const auto csv = generalization_csv(results);
    CHECK(csv.rfind("optimizer,seed,median_f_source,median_recorded_final,mean_forecast_mse\nsgd,0,", 0) == 0);
}
