#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "seqagg/tuning.hpp"

using namespace seqagg;

namespace {

std::vector<AggregationTrace> fixed_runs(const ValidatedPair& pair, Algorithm a, const std::vector<double>& grid) {
    std::vector<AggregationTrace> out;
    for (double p : grid) {
        auto f = make_fixed_forecaster(a, pair.n_models(), p);
        out.push_back(run_online(pair, *f));
    }
    return out;
}

}  // namespace

TEST_CASE("default grids") {
    const HyperGrid e = default_grid(Algorithm::ewa);
    CHECK(e.count == 300);
    CHECK(e.points.front() == 1e-20);
    CHECK(e.points.back() == 1e10);
    const HyperGrid l = default_grid(Algorithm::lasso);
    CHECK(l.count == 100);
    CHECK(l.lo == 1e-20);
    CHECK(l.hi == 1e10);
    const HyperGrid r = default_grid(Algorithm::ridge);
    CHECK(r.count == 100);
    CHECK(r.lo == 1e-30);
    CHECK(r.hi == 1e30);
    CHECK_THROWS_AS(default_grid(Algorithm::uniform), UnsupportedAlgorithm);
}

TEST_CASE("grid spacing is geometric") {
    for (const HyperGrid& g : {default_grid(Algorithm::ewa), default_grid(Algorithm::ridge), HyperGrid::parse("0.5:8:5")}) {
        const double ratio = g.points[1] / g.points[0];
        for (std::size_t i = 1; i < g.points.size(); ++i) {
            CHECK(g.points[i] > g.points[i - 1]);
            CHECK(std::abs(g.points[i] / g.points[i - 1] / ratio - 1.0) < 1e-9);
        }
    }
    const HyperGrid p = HyperGrid::parse("0.5:8:5");
    CHECK(p.points[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS(HyperGrid::parse("1:2"));
    CHECK_THROWS(HyperGrid::log_spaced(2.0, 1.0, 3));
    const HyperGrid s = default_grid(Algorithm::lasso).subsampled(10);
    CHECK(s.points.front() == 1e-20);
    CHECK(s.points.back() == 1e10);
    CHECK(s.count == 11);
}

TEST_CASE("first step picks the smallest point with uniform weights") {
    for (Algorithm a : {Algorithm::ewa, Algorithm::ridge, Algorithm::lasso}) {
        TunerState t(a, 3, std::vector<double>{0.1, 1.0, 10.0});
        const Selection s = t.select_and_forecast(1, Eigen::Vector3d(1.0, 2.0, 6.0));
        CHECK(s.index == 0);
        CHECK(s.hyperparameter == 0.1);
        CHECK(s.weights.weights == Eigen::VectorXd::Constant(3, 1.0 / 3.0));
        CHECK(s.forecast == doctest::Approx(3.0));
    }
}

TEST_CASE("single-point grid always selects that point") {
    std::mt19937_64 rng(21);
    const oracle::Instance inst = oracle::random_instance(rng, 3, 20, 0.0, 1.0);
    TunerState t(Algorithm::ridge, 3, std::vector<double>{2.5});
    const AggregationTrace trace = run_online(oracle::to_pair(inst), t);
    for (const auto& r : trace.records()) CHECK(r.hyperparameter == 2.5);
}

TEST_CASE("duplicated points keep identical losses") {
    std::mt19937_64 rng(22);
    const oracle::Instance inst = oracle::random_instance(rng, 3, 20, 0.0, 1.0);
    TunerState t(Algorithm::lasso, 3, std::vector<double>{0.3, 0.3, 0.3});
    run_online(oracle::to_pair(inst), t);
    CHECK(t.cumulative_losses()[0] == t.cumulative_losses()[1]);
    CHECK(t.cumulative_losses()[1] == t.cumulative_losses()[2]);
}

TEST_CASE("per-point losses equal standalone fixed runs") {
    std::mt19937_64 rng(23);
    for (Algorithm a : {Algorithm::ewa, Algorithm::ridge, Algorithm::lasso}) {
        const oracle::Instance inst = oracle::random_instance(rng, 4, 20, -1.0, 1.0);
        const ValidatedPair pair = oracle::to_pair(inst);
        const std::vector<double> grid{0.01, 0.5, 4.0};
        const auto runs = fixed_runs(pair, a, grid);
        TunerState t(a, 4, grid);
        std::vector<double> previous(3, 0.0);
        for (std::size_t s = 0; s < inst.t(); ++s) {
            const Eigen::VectorXd col = inst.m.col(static_cast<Eigen::Index>(s));
            t.select_and_forecast(s + 1, col);
            t.update(inst.y[s], col);
            for (std::size_t i = 0; i < 3; ++i) {
                CHECK(t.cumulative_losses()[i] == runs[i][s].cumulative_loss);
                CHECK(t.cumulative_losses()[i] >= previous[i]);
                previous[i] = t.cumulative_losses()[i];
            }
        }
    }
}

TEST_CASE("two-point EWA grid follows the better fixed run") {
    std::mt19937_64 rng(24);
    const oracle::Instance inst = oracle::random_instance(rng, 5, 51, 0.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    const std::vector<double> grid{1e-6, 5.0};
    const auto runs = fixed_runs(pair, Algorithm::ewa, grid);
    const std::size_t better = runs[0][49].cumulative_loss < runs[1][49].cumulative_loss ? 0 : 1;
    REQUIRE(runs[0][49].cumulative_loss != runs[1][49].cumulative_loss);
    TunerState t(Algorithm::ewa, 5, grid);
    const AggregationTrace trace = run_online(pair, t);
    CHECK(trace[50].hyperparameter == grid[better]);
    CHECK(trace[50].forecast == runs[better][50].forecast);
}

TEST_CASE("refining a nested grid never hurts the best fixed run") {
    std::mt19937_64 rng(25);
    const oracle::Instance inst = oracle::random_instance(rng, 4, 40, 0.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    const HyperGrid fine = HyperGrid::log_spaced(1e-3, 1e3, 13);
    const HyperGrid coarse = fine.subsampled(2);
    auto best = [&](const HyperGrid& g) {
        TunerState t(Algorithm::ridge, 4, g);
        run_online(pair, t);
        return *std::min_element(t.cumulative_losses().begin(), t.cumulative_losses().end());
    };
    CHECK(best(fine) <= best(coarse));
}
