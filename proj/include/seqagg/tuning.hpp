#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqagg/aggregators.hpp"
#include "seqagg/core.hpp"

namespace seqagg {

/// Log-equally-spaced grid of positive hyperparameter values, ascending.
struct HyperGrid {
    std::vector<double> points;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;

    static HyperGrid log_spaced(double lo, double hi, std::size_t count);
    /// Parses "lo:hi:count".
    static HyperGrid parse(const std::string& text);
    /// Every `stride`-th point, always keeping both ends.
    HyperGrid subsampled(std::size_t stride) const;
};

/// EWA: 300 points on [1e-20, 1e10]; Lasso: 100 on [1e-20, 1e10];
/// Ridge: 100 on [1e-30, 1e30].
HyperGrid default_grid(Algorithm algorithm);

struct Selection {
    std::size_t index = 0;  // into parameters()
    double hyperparameter = 0.0;
    WeightVector weights;
    double forecast = 0.0;
};

/// Runs one fixed-parameter instance of the algorithm per grid point and, at each
/// step, forecasts with the point whose cumulative past loss is smallest (ties go
/// to the smallest parameter value).
///
/// All points see the same data, so the least-squares statistics and their
/// factorization (Ridge) or path (Lasso), or the per-model losses (EWA), are kept
/// once and shared; what is per point is the hyperparameter and the cumulative loss.
/// Every point's forecast is computed by the same routine a standalone fixed run uses.
class TunerState final : public OnlineForecaster {
public:
    TunerState(Algorithm algorithm, std::size_t n_models, std::vector<double> parameters);
    TunerState(Algorithm algorithm, std::size_t n_models, const HyperGrid& grid);

    Selection select_and_forecast(std::size_t step, const Eigen::VectorXd& column);
    /// Adds each point's own squared error to its cumulative loss, then advances
    /// the shared state with (y, column).
    void update(double y, const Eigen::VectorXd& column);

    Prediction predict(std::size_t step, const Eigen::VectorXd& column) override;
    void reveal(double observation, const Eigen::VectorXd& column) override { update(observation, column); }
    Algorithm algorithm() const override { return algorithm_; }

    const std::vector<double>& parameters() const { return parameters_; }
    const std::vector<double>& cumulative_losses() const { return losses_; }
    /// Forecasts of every point at the step last passed to select_and_forecast.
    const std::vector<double>& point_forecasts() const { return point_forecasts_; }
    std::size_t steps_seen() const { return steps_seen_; }

private:
    WeightVector point_weights(std::size_t i, std::size_t step);
    void forecast_all(std::size_t step, const Eigen::VectorXd& column);
    std::size_t argmin() const;

    Algorithm algorithm_;
    std::size_t n_models_;
    std::vector<double> parameters_;
    std::vector<double> losses_;
    std::size_t steps_seen_ = 0;

    EwaState ewa_;                // losses only; its eta is unused
    LeastSquaresStats stats_;     // ridge and lasso
    std::optional<RidgeSpectrum> spectrum_;
    LassoHistory history_;        // lasso
    std::optional<LassoPath> path_;

    std::vector<double> point_forecasts_;
    std::optional<std::size_t> forecast_step_;
    std::vector<WeightVector> point_weights_;
};

}  // namespace seqagg
