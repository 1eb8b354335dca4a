#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqagg/core.hpp"

namespace seqagg {

/// floor(T / 4): the first quarter of the steps is excluded from evaluation.
std::size_t default_burn_in(std::size_t n_steps);

/// sqrt of the mean squared error over steps burn_in+1..T (1-based).
double rmse(std::span<const double> forecasts, std::span<const double> observations, std::size_t burn_in);

struct BestModel {
    std::size_t index = 0;  // 0-based
    double rmse = 0.0;
};

BestModel best_model(const ValidatedPair& pair, std::size_t burn_in);

struct ConvexOracle {
    WeightVector weights;
    double rmse = 0.0;
    double duality_gap = 0.0;  // Frank-Wolfe gap of the mean squared error at the returned point
    std::size_t iterations = 0;  // support solves
};

inline constexpr std::size_t kConvexOracleMaxIterations = 50000;

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// Best constant convex combination of the models on the evaluated window: the
/// mean squared error is minimized over the simplex by an active-set method.
/// Throws NoConvergence (with the duality gap) if first-order optimality cannot be
/// certified.
ConvexOracle best_convex_oracle(const ValidatedPair& pair, std::size_t burn_in);

struct RmseReport {
    SeriesId id;
    Algorithm algorithm = Algorithm::uniform;
    std::size_t burn_in = 0;
    double rmse_algorithm = 0.0;
    double rmse_best_model = 0.0;
    std::size_t best_model_index = 0;
    double rmse_best_convex = 0.0;
    WeightVector convex_oracle_weights;
};

RmseReport make_rmse_report(const ValidatedPair& pair, const AggregationTrace& trace, std::size_t burn_in);

struct BoundReport {
    std::string algorithm;
    double average_loss = 0.0;   // (1/T) sum (yhat_t - y_t)^2
    double epsilon = 0.0;        // regret term
    double comparator_loss = 0.0;
    double bound = 0.0;          // epsilon + comparator_loss
    double margin = 0.0;         // bound - average_loss
    double data_bound = 0.0;     // B, computed from the data
    bool passed = false;

    /// Throws BoundViolated when !passed.
    void enforce() const;
};

/// max |y_t|, |m_{j,t}| over the pair.
double data_bound(const ValidatedPair& pair);

/// ln N / (eta T), plus eta B^2 / 8 when eta > 1 / (2 B^2).
double ewa_epsilon(std::size_t n_models, std::size_t n_steps, double eta, double bound);

/// (1/T) (lambda V^2 + 4 N B^2 (1 + N B^2 T / lambda) ln(1 + B^2 T / lambda) + 5 B^2).
double ridge_epsilon(std::size_t n_models, std::size_t n_steps, double lambda, double radius, double bound);

/// Average loss of the best single model.
BoundReport check_ewa_bound(const ValidatedPair& pair, const AggregationTrace& trace, double eta);

/// Minimum average loss of sum_j v_j m_{j,t} over |v| <= radius.
double ball_comparator_loss(const ValidatedPair& pair, double radius);

BoundReport check_ridge_bound(const ValidatedPair& pair, const AggregationTrace& trace, double lambda,
                              double radius);

}  // namespace seqagg
