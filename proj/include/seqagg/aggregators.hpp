#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "seqagg/core.hpp"

namespace seqagg {

/// Sufficient statistics of the unpenalized least-squares criterion
/// sum_t (y_t - v . m_t)^2 over the steps revealed so far.
struct LeastSquaresStats {
    Eigen::MatrixXd gram;     // sum_t m_t m_t^T
    Eigen::VectorXd moment;   // sum_t y_t m_t
    double sum_sq_obs = 0.0;  // sum_t y_t^2
    std::size_t steps_seen = 0;

    explicit LeastSquaresStats(std::size_t n_models);
    void add(double y, const Eigen::VectorXd& column);
    std::size_t n_models() const { return static_cast<std::size_t>(moment.size()); }
};

/// Spectral factorization gram = Q diag(mu) Q^T. Solving (lambda I + gram) w = moment
/// then costs O(N^2) per lambda, which is what lets a tuner share one factorization
/// across its whole grid.
class RidgeSpectrum {
public:
    explicit RidgeSpectrum(const LeastSquaresStats& stats);
    /// Throws SolveFailure when lambda + mu_i is not positive or the result is not finite.
    Eigen::VectorXd solve(double lambda) const;
    /// (lambda I + gram)^{-1} rhs.
    Eigen::VectorXd solve(double lambda, const Eigen::VectorXd& rhs) const;

private:
    Eigen::MatrixXd basis_;
    Eigen::VectorXd eigenvalues_;
    Eigen::VectorXd projected_moment_;
};

class RidgeState {
public:
    RidgeState(std::size_t n_models, double lambda);

    void update(double y, const Eigen::VectorXd& column) { stats_.add(y, column); }
    double lambda() const { return lambda_; }
    const LeastSquaresStats& stats() const { return stats_; }
    std::size_t steps_seen() const { return stats_.steps_seen; }

private:
    double lambda_;
    LeastSquaresStats stats_;
};

/// Minimizer of lambda |v|^2 + sum_{t<T} (y_t - v . m_t)^2; uniform before any data.
WeightVector ridge_weights(const RidgeState& state, std::size_t step = 0);
WeightVector ridge_weights(const LeastSquaresStats& stats, const RidgeSpectrum& spectrum,
                           double lambda, std::size_t step);

class EwaState {
public:
    EwaState(std::size_t n_models, double eta);

    void update(double y, const Eigen::VectorXd& column);
    double eta() const { return eta_; }
    const Eigen::VectorXd& cumulative_losses() const { return losses_; }
    std::size_t steps_seen() const { return steps_seen_; }

private:
    double eta_;
    Eigen::VectorXd losses_;
    std::size_t steps_seen_ = 0;
};

/// exp(-eta L_j) / sum_k exp(-eta L_k), shifted by min_j L_j before exponentiation.
Eigen::VectorXd ewa_distribution(const Eigen::VectorXd& cumulative_losses, double eta);
WeightVector ewa_weights(const EwaState& state, std::size_t step = 0);

// Coordinate descent on the quadratic form
//   lambda |v|_1 + v^T G v - 2 b^T v + const,   G = gram, b = moment.
// A sweep updates every coordinate once with the soft-threshold rule; the run
// stops when the largest coordinate change of a sweep drops below
// kLassoTolerance * (1 + max_j |v_j|). Every kLassoRefineEvery sweeps the iterate
// also moves toward the minimizer over its current support and signs.
// Online runs read their weights off LassoPath and use this only as a final polish.
inline constexpr double kLassoTolerance = 1e-10;
inline constexpr std::size_t kLassoMaxSweeps = 100000;
inline constexpr std::size_t kLassoRefineEvery = 5;

struct LassoKkt {
    double max_violation = 0.0;  // absolute, in gradient units
    double scale = 1.0;          // 1 + lambda + max_j |gradient_j|
    double relative() const { return max_violation / scale; }
};

/// Subgradient optimality residual of `v`. The gradient of the quadratic part is
/// 2 (G v - b); at a nonzero coordinate it must equal -lambda sign(v_j), at a zero
/// coordinate its magnitude must not exceed lambda.
LassoKkt lasso_kkt(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                   const Eigen::VectorXd& v);

double lasso_objective(const LeastSquaresStats& stats, double lambda, const Eigen::VectorXd& v);

struct LassoSolution {
    Eigen::VectorXd weights;
    std::size_t sweeps = 0;
    bool converged = true;
    LassoKkt kkt;
};

/// Coordinate descent from `start` (zero when empty). Throws NoConvergence
/// (carrying the final KKT residual) at kLassoMaxSweeps.
LassoSolution solve_lasso(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                          Eigen::VectorXd start);
/// The same descent capped at max_sweeps; never throws on the cap.
LassoSolution polish_lasso(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                           Eigen::VectorXd start, std::size_t max_sweeps);

/// Past (y_t, m_t) pairs as a t x N design matrix and observation vector.
struct LassoHistory {
    Eigen::MatrixXd design;
    Eigen::VectorXd observed;

    explicit LassoHistory(std::size_t n_models);
    void add(double y, const Eigen::VectorXd& column);
};

/// The Lasso solution as a function of lambda is piecewise linear. The path starts
/// at v = 0 for lambda >= 2 max_j |b_j| and is followed downward one breakpoint at a
/// time (a model enters or leaves the active set). The active-set system
/// X_A^T X_A d = sign(v_A) is solved through a thin QR of the active design columns,
/// updated as models enter and leave; a model whose column is numerically in the span
/// of the active ones is held out until the next model leaves. A model that is
/// already past the boundary when it enters is followed by feature-sign steps at
/// the current lambda, which put the path back on the exact solution. Breakpoints are
/// computed on demand and do not depend on which lambdas are queried, so every query
/// of the same data returns the same bits.
class LassoPath {
public:
    explicit LassoPath(const LassoHistory& history);

    /// Solution at lambda. Below the frontier of a stalled path this is the
    /// frontier point.
    Eigen::VectorXd at(double lambda);
    /// Minimizer of the Lasso objective restricted to the support and orthant given
    /// by `signs` (entries -1, 0, 1), solved by QR. Empty when the support columns
    /// are rank deficient.
    Eigen::VectorXd refit(double lambda, const Eigen::VectorXd& signs) const;
    std::size_t segments() const { return segments_.size(); }
    /// Smallest lambda reached so far; 0 once the path is complete.
    double frontier() const { return 2.0 * h_; }
    bool stalled() const { return stalled_; }

private:
    struct Segment {
        double h_start;  // h = lambda / 2
        double h_end;
        Eigen::VectorXd start;
        Eigen::VectorXd direction;  // v(h) = start + (h_start - h) direction
    };

    bool extend();
    bool add_column(Eigen::Index j);
    void remove_column(std::size_t a);
    void resolve_active();

    Eigen::MatrixXd design_;
    Eigen::VectorXd observed_;
    Eigen::MatrixXd q_;  // design_A = q_ r_ on the first active_.size() columns
    Eigen::MatrixXd r_;
    std::vector<Segment> segments_;
    double h_max_ = 0.0;
    double h_ = 0.0;
    Eigen::VectorXd v_;
    std::vector<Eigen::Index> active_;
    std::vector<double> signs_;
    std::vector<char> blocked_;
    Eigen::Index just_dropped_ = -1;
    std::size_t events_ = 0;
    double unblocked_at_ = -1.0;
    bool done_ = false;
    bool stalled_ = false;
};

/// A column is collinear with the active ones when its component orthogonal to
/// them is below this fraction of its norm.
inline constexpr double kLassoCollinear = 1e-13;

/// A path point is accepted when its KKT violation is within
/// max(kLassoPathTolerance * scale, rounding floor). Otherwise it is refit on its
/// support for up to kLassoRepairRounds rounds, each adding the worst inactive
/// violator, then polished by kLassoPolishSweeps of coordinate descent; the
/// candidate with the smallest violation is returned.
inline constexpr double kLassoPathTolerance = 1e-9;
inline constexpr std::size_t kLassoRepairRounds = 20;
inline constexpr std::size_t kLassoPolishSweeps = 200;

class LassoState {
public:
    LassoState(std::size_t n_models, double lambda);

    void update(double y, const Eigen::VectorXd& column);
    double lambda() const { return lambda_; }
    const LeastSquaresStats& stats() const { return stats_; }
    const LassoHistory& history() const { return history_; }
    std::size_t steps_seen() const { return stats_.steps_seen; }

private:
    double lambda_;
    LeastSquaresStats stats_;
    LassoHistory history_;
};

/// Uniform weights before any data; otherwise the path solution at lambda.
WeightVector lasso_weights(const LassoState& state, std::size_t step = 0);
/// Same, reading off a path built from the same data as `stats` (shared across lambdas).
WeightVector lasso_weights(const LeastSquaresStats& stats, LassoPath& path, double lambda, std::size_t step);

/// sum_j w_j m_j.
double aggregate(const WeightVector& weights, const Eigen::VectorXd& column);

struct Prediction {
    WeightVector weights;
    double forecast = 0.0;
    double hyperparameter = 0.0;
};

/// Sequential protocol: predict(t) may only use what reveal() has been given for
/// steps before t, plus the model forecasts at t.
class OnlineForecaster {
public:
    virtual ~OnlineForecaster() = default;
    virtual Prediction predict(std::size_t step, const Eigen::VectorXd& column) = 0;
    virtual void reveal(double observation, const Eigen::VectorXd& column) = 0;
    virtual Algorithm algorithm() const = 0;
};

/// One algorithm with a constant hyperparameter (eta for EWA, lambda for Ridge/Lasso,
/// ignored for uniform).
std::unique_ptr<OnlineForecaster> make_fixed_forecaster(Algorithm algorithm, std::size_t n_models,
                                                        double hyperparameter);

/// Runs steps 1..T. Solver errors are rethrown as SolveFailure naming the step.
AggregationTrace run_online(const ValidatedPair& pair, OnlineForecaster& forecaster);

}  // namespace seqagg
