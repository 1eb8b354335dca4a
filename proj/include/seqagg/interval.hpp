#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqagg {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double center() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
    bool operator==(const Interval&) const = default;
};

/// Inclusion-maximum of `x` and [c - sigma, c + sigma], c the center of `x`.
Interval enlarge(const Interval& x, double sigma);

/// Extreme average one-step variations, in units per step. Either sign is allowed.
struct ConeSlope {
    double down = 0.0;
    double up = 0.0;

    /// Same center, half-width scaled by `factor`.
    ConeSlope widened(double factor) const;
};

/// Physical bounds intersected with every scenario interval.
struct Clamp {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    /// "lo:hi"; an empty side means unbounded, e.g. "0:".
    static Clamp parse(const std::string& text);
};

/// Box of plausible continuations z_T..z_{T+K}: interval k is
/// [anchor + k * slope.down, anchor + k * slope.up] intersected with the clamp.
struct ScenarioCone {
    double anchor = 0.0;
    ConeSlope slope;
    Clamp clamp;
    std::vector<Interval> intervals;  // k = 0..K

    std::size_t horizon() const { return intervals.size(); }
};

inline constexpr std::size_t kVariationWindow = 10;

/// Throws EmptyCone when clamping empties an interval.
ScenarioCone make_cone(double anchor, ConeSlope slope, std::size_t horizon, Clamp clamp = {});

/// Min and max of the 10-step average variations (x_{t+10} - x_t) / 10 over the
/// learning observations and over every model trajectory on the prediction part
/// (overlapping windows). `prediction_forecasts` is N x (K+1), columns T..T+K.
ConeSlope scan_slopes(std::span<const double> learning, const Eigen::MatrixXd& prediction_forecasts);

/// Cone anchored at the last learning observation. Needs at least 11 learning
/// steps (InsufficientHistory otherwise).
ScenarioCone build_cone(std::span<const double> learning, const Eigen::MatrixXd& prediction_forecasts,
                        Clamp clamp = {});

struct NoiseEstimate {
    double sigma_max = 0.0;
    double stability_threshold = 150.0;
    std::size_t stability_window = 15;
    std::vector<std::size_t> stable_steps;  // 1-based
};

/// A step t is stable when |y_t - y_{t-r}| <= threshold for every r in
/// [-window, window] that stays inside the series; only steps with a full centered
/// 5-point neighbourhood are candidates. sigma_max is the largest deviation of a
/// stable y_t from its centered 5-point mean, 0 when no step is stable.
NoiseEstimate estimate_noise(std::span<const double> learning, double stability_threshold,
                             std::size_t window = 15);

struct ModelFilter {
    std::vector<std::size_t> kept;  // 0-based model rows, ascending
    std::vector<double> rmse;
    double best_rmse = 0.0;
    /// The best model fits the learning part exactly, so only exact fits survive.
    bool zero_rmse_best = false;
};

inline constexpr double kFilterFactor = 10.0;

/// Keeps models whose learning-part RMSE is at most 10 times the best one.
/// `learning_forecasts` is N x (T-1).
ModelFilter filter_models(std::span<const double> learning, const Eigen::MatrixXd& learning_forecasts);

/// Inputs of a multi-step run: observations up to T-1 and model forecasts up to T+K.
struct IntervalProblem {
    std::vector<double> learning;    // y_1..y_{T-1}
    Eigen::MatrixXd forecasts;       // N x (T+K), columns 1..T+K
    /// y_T; initial matching is skipped when it is unknown.
    std::optional<double> matching_observation;

    std::size_t learning_steps() const { return learning.size(); }
    /// K + 1, the number of steps T..T+K.
    std::size_t horizon() const;
    Eigen::MatrixXd prediction_forecasts() const;
    Eigen::MatrixXd learning_forecasts() const;
    /// Same problem restricted to the given model rows.
    IntervalProblem select_models(const std::vector<std::size_t>& rows) const;
};

enum class MatchingOrder { enlarge_then_shift };

struct IntervalSeries {
    std::size_t first_step = 0;      // T, 1-based
    std::vector<Interval> raw;       // hull of scenario forecasts, k = 0..K
    std::vector<Interval> intervals; // after enlargement and shift
    double sigma_applied = 0.0;
    double shift = 0.0;              // added to every enlarged interval
    std::vector<double> mismatches;  // the Delta_t = yhat_t - y_t averaged into -shift
    MatchingOrder order = MatchingOrder::enlarge_then_shift;

    std::size_t size() const { return intervals.size(); }
    double center(std::size_t k) const { return intervals[k].center(); }
};

/// Exact hull over the cone of the Ridge forecast built from putative past
/// y_1..y_{T-1}, z_T..z_{T+k-1}. The forecast is affine in z for a fixed lambda, so
/// each endpoint is reached at a corner of the box picked by coefficient sign.
/// Initial matching shifts by minus the mean of Delta_{T-4}..Delta_T.
IntervalSeries ridge_interval_forecast(const IntervalProblem& problem, const ScenarioCone& cone,
                                       double lambda, double sigma_max);

/// Guaranteed superset of the EWA hull. Cumulative losses are bounded per model
/// over the cone, which bounds every weight; the forecast is then maximized and
/// minimized over the simplex intersected with those weight boxes.
/// Initial matching shifts by -Delta_T.
IntervalSeries ewa_interval_forecast(const IntervalProblem& problem, const ScenarioCone& cone,
                                     double eta, double sigma_max);

struct WeightBox {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Max (or min) of sum_j w_j x_j over the simplex intersected with the box.
/// Throws InfeasibleWeightBox when the intersection is empty.
double extreme_over_box(const WeightBox& box, const Eigen::VectorXd& x, bool maximize);

}  // namespace seqagg
