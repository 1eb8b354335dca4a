#include <doctest.h>

#include <cmath>
#include <limits>

#include "seqagg/core.hpp"

using namespace seqagg;

namespace {

SeriesId sid(const std::string& label = "P1") { return SeriesId(PropertyKind::bottomhole_pressure, label, "psi"); }

ObservationSeries obs(std::size_t n, const std::string& label = "P1") {
    std::vector<double> v(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<double>(i);
        t[i] = 30.0 * static_cast<double>(i + 1);
    }
    return ObservationSeries(sid(label), v, t);
}

}  // namespace

TEST_CASE("series id and observation invariants") {
    CHECK_THROWS_AS(SeriesId(PropertyKind::oil_rate, "", "bbl/day"), std::invalid_argument);
    CHECK_THROWS_AS(SeriesId(PropertyKind::oil_rate, "P1", ""), std::invalid_argument);
    CHECK_THROWS(ObservationSeries(sid(), {1.0}, {1.0}));
    CHECK_THROWS(ObservationSeries(sid(), {1.0, 2.0}, {1.0}));
    CHECK_THROWS(ObservationSeries(sid(), {1.0, 2.0}, {2.0, 2.0}));
    CHECK_THROWS_AS(validate_pair(ObservationSeries(sid(), {1.0, std::nan("")}, {1.0, 2.0}),
                                  EnsembleMatrix(sid(), Eigen::MatrixXd::Ones(1, 2))),
                    NonFiniteValue);
    CHECK(property_kind_from_string(to_string(PropertyKind::water_rate)) == PropertyKind::water_rate);
    CHECK(algorithm_from_string(to_string(Algorithm::lasso)) == Algorithm::lasso);
}

TEST_CASE("validate_pair accepts consistent shapes") {
    const ValidatedPair p = validate_pair(obs(5), EnsembleMatrix(sid(), Eigen::MatrixXd::Ones(3, 5)));
    CHECK(p.n_steps() == 5);
    CHECK(p.n_models() == 3);
}

TEST_CASE("validate_pair reports a length mismatch") {
    CHECK_THROWS_AS(validate_pair(obs(5), EnsembleMatrix(sid(), Eigen::MatrixXd::Ones(3, 4))), LengthMismatch);
}

TEST_CASE("validate_pair reports an id mismatch") {
    CHECK_THROWS_AS(validate_pair(obs(5, "P1"), EnsembleMatrix(sid("P2"), Eigen::MatrixXd::Ones(3, 5))), IdMismatch);
}

TEST_CASE("validate_pair names the non-finite entry") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(3, 5);
    m(1, 2) = std::numeric_limits<double>::infinity();
    try {
        validate_pair(obs(5), EnsembleMatrix(sid(), m));
        FAIL("expected NonFiniteValue");
    } catch (const NonFiniteValue& e) {
        CHECK(e.row == 2);
        CHECK(e.column == 3);
    }
}

TEST_CASE("convex weights obey the simplex check") {
    Eigen::VectorXd w(3);
    w << 0.2, 0.3, 0.5;
    CHECK(on_simplex(w));
    w[2] = 0.5 + 2e-9;
    CHECK_FALSE(on_simplex(w));
    w << -1e-3, 0.5, 0.501;
    CHECK_FALSE(on_simplex(w));

    WeightVector v = WeightVector::uniform(4, Algorithm::ewa, WeightFlavor::convex, 1.0, 1);
    CHECK_NOTHROW(v.check());
    v.weights[0] = 0.5;
    CHECK_THROWS(v.check());
    v.flavor = WeightFlavor::linear;
    CHECK_NOTHROW(v.check());
    v.weights[1] = std::nan("");
    CHECK_THROWS(v.check());
}

TEST_CASE("trace cumulative loss is the running sum") {
    AggregationTrace trace;
    const WeightVector w = WeightVector::uniform(2, Algorithm::uniform, WeightFlavor::convex, 0.0, 1);
    double sum = 0.0;
    for (std::size_t t = 1; t <= 10; ++t) {
        const double f = 0.1 * static_cast<double>(t);
        trace.append(t, w, f, 1.0, 0.0);
        sum += (f - 1.0) * (f - 1.0);
        CHECK(trace.cumulative_loss() == doctest::Approx(sum).epsilon(1e-12));
        if (t > 1) CHECK(trace[t - 1].cumulative_loss >= trace[t - 2].cumulative_loss);
    }
    CHECK_THROWS(trace.append(12, w, 0.0, 0.0, 0.0));
}

TEST_CASE("ensemble model selection keeps rows in order") {
    Eigen::MatrixXd m(3, 2);
    m << 1, 2, 3, 4, 5, 6;
    const EnsembleMatrix e = EnsembleMatrix(sid(), m).select_models({2, 0});
    CHECK(e.n_models() == 2);
    CHECK(e.values()(0, 1) == 6);
    CHECK(e.values()(1, 0) == 1);
}
