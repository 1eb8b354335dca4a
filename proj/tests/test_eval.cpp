#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "seqagg/aggregators.hpp"
#include "seqagg/eval.hpp"

using namespace seqagg;

TEST_CASE("rmse window and divisor") {
    CHECK(default_burn_in(127) == 31);
    std::vector<double> y(127, 0.0), f(127, 0.0);
    CHECK(rmse(f, y, 31) == 0.0);
    for (std::size_t t = 31; t < 127; ++t) f[t] = 3.0;
    CHECK(rmse(f, y, 31) == doctest::Approx(3.0).epsilon(1e-15));
    f[31] = std::sqrt(96.0 * 2.0);
    for (std::size_t t = 32; t < 127; ++t) f[t] = 0.0;
    f[0] = 1e6;  // inside the burn-in, ignored
    CHECK(rmse(f, y, 31) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK_THROWS(rmse(f, y, 127));
}

TEST_CASE("convex oracle on small cases") {
    oracle::Instance one;
    one.y = {1.0, 2.0, 3.0, 5.0};
    one.m.resize(1, 4);
    one.m << 1.0, 1.0, 1.0, 1.0;
    const ConvexOracle single = best_convex_oracle(oracle::to_pair(one), 1);
    CHECK(single.weights.weights[0] == 1.0);
    CHECK(single.rmse == doctest::Approx(best_model(oracle::to_pair(one), 1).rmse).epsilon(1e-14));

    oracle::Instance half;
    half.y = {1.0, 2.0, 3.0, 4.0, 5.0};
    half.m.resize(2, 5);
    half.m.row(0) = Eigen::RowVectorXd::LinSpaced(5, 0.0, 4.0);
    half.m.row(1) = Eigen::RowVectorXd::LinSpaced(5, 2.0, 6.0);
    const ConvexOracle mid = best_convex_oracle(oracle::to_pair(half), 1);
    CHECK(mid.weights.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mid.rmse < 1e-12);
}

TEST_CASE("convex oracle against the barycentric grid") {
    std::mt19937_64 rng(41);
    const oracle::Instance inst = oracle::random_instance(rng, 3, 60, 0.0, 1.0);
    const ConvexOracle c = best_convex_oracle(oracle::to_pair(inst), 15);
    CHECK(on_simplex(c.weights.weights));
    const double grid = oracle::simplex_grid_mse(inst, 15, 200);
    CHECK(c.rmse * c.rmse <= grid + 1e-8);
    CHECK(c.rmse * c.rmse == doctest::Approx(oracle::window_mse(inst, 15, c.weights.weights)).epsilon(1e-10));
}

TEST_CASE("convex oracle is first-order optimal and beats every vertex") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const oracle::Instance inst = oracle::random_instance(rng, 6, 40, -1.0, 1.0);
        const ValidatedPair pair = oracle::to_pair(inst);
        const ConvexOracle c = best_convex_oracle(pair, 10);
        CHECK(c.rmse <= best_model(pair, 10).rmse + 1e-9);
        // gradient of the window MSE at the returned point
        const Eigen::VectorXd& w = c.weights.weights;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(6);
        for (std::size_t t = 10; t < inst.t(); ++t) {
            const Eigen::VectorXd col = inst.m.col(static_cast<Eigen::Index>(t));
            grad += 2.0 * (col.dot(w) - inst.y[t]) * col / 30.0;
        }
        const double scale = 1.0 + grad.cwiseAbs().maxCoeff();
        for (Eigen::Index j = 0; j < 6; ++j) CHECK(grad[j] - grad.dot(w) >= -1e-6 * scale);
    }
}

TEST_CASE("simplex projection") {
    CHECK(project_to_simplex(Eigen::Vector3d(0.2, 0.3, 0.5)).isApprox(Eigen::Vector3d(0.2, 0.3, 0.5)));
    CHECK(project_to_simplex(Eigen::Vector3d(5.0, 0.0, 0.0)).isApprox(Eigen::Vector3d(1.0, 0.0, 0.0)));
    CHECK(project_to_simplex(Eigen::Vector2d(0.0, 0.0)).isApprox(Eigen::Vector2d(0.5, 0.5)));
}

TEST_CASE("regret terms") {
    CHECK(ewa_epsilon(10, 200, 0.5, 1.0) == doctest::Approx(std::log(10.0) / 100.0));
    CHECK(ewa_epsilon(10, 200, 2.0, 1.0) == doctest::Approx(std::log(10.0) / 400.0 + 0.25));
    const double lambda = std::sqrt(300.0);
    const double expected =
        (lambda * 4.0 + 4.0 * 5.0 * (1.0 + 5.0 * 300.0 / lambda) * std::log(1.0 + 300.0 / lambda) + 5.0) / 300.0;
    CHECK(ridge_epsilon(5, 300, lambda, 2.0, 1.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("ewa bound holds on random instances") {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 10; ++rep) {
        const oracle::Instance inst = oracle::random_instance(rng, 10, 200, 0.0, 1.0);
        const ValidatedPair pair = oracle::to_pair(inst);
        const double eta = 1.0 / (2.0 * std::pow(data_bound(pair), 2));
        auto f = make_fixed_forecaster(Algorithm::ewa, 10, eta);
        const BoundReport r = check_ewa_bound(pair, run_online(pair, *f), eta);
        CHECK(r.passed);
        CHECK_NOTHROW(r.enforce());
    }
}

TEST_CASE("ewa bound is vacuous for a vanishing eta") {
    std::mt19937_64 rng(44);
    const oracle::Instance inst = oracle::random_instance(rng, 4, 50, 0.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    auto f = make_fixed_forecaster(Algorithm::ewa, 4, 1e-20);
    const BoundReport r = check_ewa_bound(pair, run_online(pair, *f), 1e-20);
    CHECK(r.passed);
    CHECK(r.epsilon > 1e15);
}

TEST_CASE("ridge bound and ball comparator") {
    std::mt19937_64 rng(45);
    const oracle::Instance inst = oracle::random_instance(rng, 5, 300, -1.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    const double lambda = std::sqrt(300.0);
    auto f = make_fixed_forecaster(Algorithm::ridge, 5, lambda);
    const BoundReport r = check_ridge_bound(pair, run_online(pair, *f), lambda, 2.0);
    CHECK(r.passed);

    // V = 1 contains every vertex, so the ball infimum is at most the best model's loss
    const double best = best_model(pair, 0).rmse;
    CHECK(ball_comparator_loss(pair, 1.0) <= best * best + 1e-12);
    // the constrained minimizer is no better than the unconstrained one and improves with V
    const Eigen::VectorXd ls = oracle::dense_ridge(inst.y, inst.m, inst.t(), 1e-12);
    const double free = oracle::window_mse(inst, 0, ls);
    CHECK(ball_comparator_loss(pair, 0.1) >= ball_comparator_loss(pair, 1.0));
    CHECK(ball_comparator_loss(pair, 1e6) == doctest::Approx(free).epsilon(1e-9));
    CHECK(ball_comparator_loss(pair, 0.1) >= free);

    auto g = make_fixed_forecaster(Algorithm::ridge, 5, 1e30);
    const BoundReport vacuous = check_ridge_bound(pair, run_online(pair, *g), 1e30, 2.0);
    CHECK(vacuous.passed);
    CHECK(vacuous.epsilon > 1e27);
}

TEST_CASE("ball comparator on the sphere matches a direct search") {
    std::mt19937_64 rng(46);
    const oracle::Instance inst = oracle::random_instance(rng, 2, 40, -1.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    const double radius = 0.01;
    REQUIRE(oracle::dense_ridge(inst.y, inst.m, inst.t(), 1e-12).norm() > radius);
    double best = INFINITY;
    for (int i = 0; i < 200000; ++i) {
        const double a = 2.0 * M_PI * i / 200000.0;
        best = std::min(best, oracle::window_mse(inst, 0, Eigen::Vector2d(radius * std::cos(a), radius * std::sin(a))));
    }
    CHECK(ball_comparator_loss(pair, radius) == doctest::Approx(best).epsilon(1e-8));
}

TEST_CASE("a tampered trace violates the bound") {
    std::mt19937_64 rng(47);
    const oracle::Instance inst = oracle::random_instance(rng, 3, 50, 0.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    auto f = make_fixed_forecaster(Algorithm::ewa, 3, 0.5);
    const AggregationTrace clean = run_online(pair, *f);
    AggregationTrace bad;
    for (const auto& r : clean.records()) bad.append(r.step, r.weights, r.forecast + 50.0, r.observation, r.hyperparameter);
    const BoundReport report = check_ewa_bound(pair, bad, 0.5);
    CHECK_FALSE(report.passed);
    CHECK_THROWS_AS(report.enforce(), BoundViolated);
}

TEST_CASE("rmse report") {
    std::mt19937_64 rng(48);
    const oracle::Instance inst = oracle::random_instance(rng, 4, 40, 0.0, 1.0);
    const ValidatedPair pair = oracle::to_pair(inst);
    auto f = make_fixed_forecaster(Algorithm::ridge, 4, 1.0);
    const AggregationTrace trace = run_online(pair, *f);
    const RmseReport r = make_rmse_report(pair, trace, 10);
    CHECK(r.burn_in == 10);
    CHECK(r.rmse_algorithm == doctest::Approx(rmse(trace.forecasts(), inst.y, 10)));
    CHECK(r.rmse_best_convex <= r.rmse_best_model + 1e-9);
    CHECK(r.best_model_index == best_model(pair, 10).index);
}
