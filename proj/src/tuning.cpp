#include "seqagg/tuning.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace seqagg {

HyperGrid HyperGrid::log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("grid bounds must be positive");
    if (count == 0) throw std::invalid_argument("grid needs at least one point");
    if (count == 1 && lo != hi) throw std::invalid_argument("single-point grid needs lo == hi");
    if (count > 1 && !(hi > lo)) throw std::invalid_argument("grid needs lo < hi");
    HyperGrid g;
    g.lo = lo;
    g.hi = hi;
    g.count = count;
    g.points.resize(count);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g.points[i] = std::pow(10.0, a + frac * (b - a));
    }
    g.points.front() = lo;
    g.points.back() = hi;
    return g;
}

HyperGrid HyperGrid::parse(const std::string& text) {
    std::istringstream in(text);
    std::string lo, hi, count;
    if (!std::getline(in, lo, ':') || !std::getline(in, hi, ':') || !std::getline(in, count))
        throw std::invalid_argument("grid must be lo:hi:count, got '" + text + "'");
    return log_spaced(std::stod(lo), std::stod(hi), static_cast<std::size_t>(std::stoul(count)));
}

HyperGrid HyperGrid::subsampled(std::size_t stride) const {
    if (stride <= 1 || count <= 2) return *this;
    HyperGrid g = *this;
    g.points.clear();
    for (std::size_t i = 0; i < count; i += stride) g.points.push_back(points[i]);
    if (g.points.back() != points.back()) g.points.push_back(points.back());
    g.count = g.points.size();
    return g;
}

HyperGrid default_grid(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::ewa: return HyperGrid::log_spaced(1e-20, 1e10, 300);
        case Algorithm::lasso: return HyperGrid::log_spaced(1e-20, 1e10, 100);
        case Algorithm::ridge: return HyperGrid::log_spaced(1e-30, 1e30, 100);
        case Algorithm::uniform: break;
    }
    throw UnsupportedAlgorithm("no hyperparameter grid for " + to_string(algorithm));
}

TunerState::TunerState(Algorithm algorithm, std::size_t n_models, std::vector<double> parameters)
    : algorithm_(algorithm),
      n_models_(n_models),
      parameters_(std::move(parameters)),
      losses_(parameters_.size(), 0.0),
      ewa_(n_models, 1.0),
      stats_(n_models),
      history_(n_models) {
    if (algorithm_ == Algorithm::uniform) throw UnsupportedAlgorithm("uniform has no hyperparameter to tune");
    if (parameters_.empty()) throw std::invalid_argument("tuner needs at least one grid point");
    for (double p : parameters_) {
        if (!(p > 0.0)) throw std::invalid_argument("grid points must be positive");
    }
}

TunerState::TunerState(Algorithm algorithm, std::size_t n_models, const HyperGrid& grid)
    : TunerState(algorithm, n_models, grid.points) {}

WeightVector TunerState::point_weights(std::size_t i, std::size_t step) {
    const double p = parameters_[i];
    switch (algorithm_) {
        case Algorithm::ewa: {
            if (steps_seen_ == 0) return WeightVector::uniform(n_models_, Algorithm::ewa, WeightFlavor::convex, p, step);
            WeightVector w;
            w.weights = ewa_distribution(ewa_.cumulative_losses(), p);
            w.flavor = WeightFlavor::convex;
            w.algorithm = Algorithm::ewa;
            w.hyperparameter = p;
            w.step = step;
            return w;
        }
        case Algorithm::ridge:
            if (steps_seen_ == 0) return ridge_weights(stats_, RidgeSpectrum(stats_), p, step);
            if (!spectrum_) spectrum_.emplace(stats_);
            return ridge_weights(stats_, *spectrum_, p, step);
        case Algorithm::lasso:
            if (!path_) path_.emplace(history_);
            return lasso_weights(stats_, *path_, p, step);
        case Algorithm::uniform: break;
    }
    throw UnsupportedAlgorithm("uniform has no hyperparameter to tune");
}

void TunerState::forecast_all(std::size_t step, const Eigen::VectorXd& column) {
    if (column.size() != static_cast<Eigen::Index>(n_models_)) throw LengthMismatch(n_models_, column.size());
    if (forecast_step_ == step) return;
    point_forecasts_.resize(parameters_.size());
    point_weights_.resize(parameters_.size());
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        point_weights_[i] = point_weights(i, step);
        point_forecasts_[i] = aggregate(point_weights_[i], column);
    }
    forecast_step_ = step;
}

std::size_t TunerState::argmin() const {
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        const double loss = std::isnan(losses_[i]) ? std::numeric_limits<double>::infinity() : losses_[i];
        if (!found || loss < best_loss || (loss == best_loss && parameters_[i] < parameters_[best])) {
            best = i;
            best_loss = loss;
            found = true;
        }
    }
    return best;
}

Selection TunerState::select_and_forecast(std::size_t step, const Eigen::VectorXd& column) {
    forecast_all(step, column);
    Selection s;
    s.index = argmin();
    s.hyperparameter = parameters_[s.index];
    s.weights = point_weights_[s.index];
    s.forecast = point_forecasts_[s.index];
    return s;
}

void TunerState::update(double y, const Eigen::VectorXd& column) {
    if (!forecast_step_) forecast_all(steps_seen_ + 1, column);
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        const double e = point_forecasts_[i] - y;
        losses_[i] += e * e;
    }
    if (algorithm_ == Algorithm::ewa) {
        ewa_.update(y, column);
    } else {
        stats_.add(y, column);
        if (algorithm_ == Algorithm::lasso) history_.add(y, column);
        spectrum_.reset();
        path_.reset();
    }
    ++steps_seen_;
    forecast_step_.reset();
}

Prediction TunerState::predict(std::size_t step, const Eigen::VectorXd& column) {
    Selection s = select_and_forecast(step, column);
    Prediction p;
    p.weights = std::move(s.weights);
    p.forecast = s.forecast;
    p.hyperparameter = s.hyperparameter;
    return p;
}

}  // namespace seqagg
