#include "seqagg/core.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

namespace seqagg {

LengthMismatch::LengthMismatch(std::size_t expected_, std::size_t actual_)
    : Error(fmt::format("length mismatch: expected {} steps, got {}", expected_, actual_)),
      expected(expected_),
      actual(actual_) {}

NonFiniteValue::NonFiniteValue(std::size_t row_, std::size_t column_)
    : Error(fmt::format("non-finite value at ({}, {})", row_, column_)), row(row_), column(column_) {}

SolveFailure::SolveFailure(const std::string& what, std::size_t step_)
    : Error(step_ == 0 ? what : fmt::format("step {}: {}", step_, what)), step(step_) {}

NoConvergence::NoConvergence(const std::string& what, double residual_)
    : Error(fmt::format("{} (final residual {:.3e})", what, residual_)), residual(residual_) {}

EmptyCone::EmptyCone(std::size_t k_, double lo, double hi)
    : Error(fmt::format("scenario interval at k = {} is empty after clamping: [{}, {}]", k_, lo, hi)),
      k(k_) {}

ParseError::ParseError(const std::string& path, std::size_t line_, const std::string& detail)
    : Error(fmt::format("{}:{}: {}", path, line_, detail)), line(line_) {}

NonContiguousSteps::NonContiguousSteps(const std::string& path, std::size_t expected_step_)
    : Error(fmt::format("{}: steps not contiguous, expected step {}", path, expected_step_)),
      expected_step(expected_step_) {}

std::string to_string(PropertyKind kind) {
    switch (kind) {
        case PropertyKind::bottomhole_pressure: return "bottomhole_pressure";
        case PropertyKind::oil_rate: return "oil_rate";
        case PropertyKind::water_rate: return "water_rate";
        case PropertyKind::other: return "other";
    }
    return "other";
}

PropertyKind property_kind_from_string(const std::string& text) {
    if (text == "bottomhole_pressure") return PropertyKind::bottomhole_pressure;
    if (text == "oil_rate") return PropertyKind::oil_rate;
    if (text == "water_rate") return PropertyKind::water_rate;
    if (text == "other") return PropertyKind::other;
    throw std::invalid_argument("unknown property kind: " + text);
}

SeriesId::SeriesId(PropertyKind kind_, std::string well_label_, std::string units_)
    : kind(kind_), well_label(std::move(well_label_)), units(std::move(units_)) {
    if (well_label.empty()) throw std::invalid_argument("series id: empty well label");
    if (units.empty()) throw std::invalid_argument("series id: empty units");
}

ObservationSeries::ObservationSeries(SeriesId id, std::vector<double> values,
                                     std::vector<double> step_times)
    : id_(std::move(id)), values_(std::move(values)), step_times_(std::move(step_times)) {
    if (values_.size() != step_times_.size())
        throw LengthMismatch(values_.size(), step_times_.size());
    if (values_.size() < 2)
        throw std::invalid_argument("observation series needs at least 2 steps");
    for (std::size_t t = 1; t < step_times_.size(); ++t) {
        if (!(step_times_[t] > step_times_[t - 1]))
            throw std::invalid_argument(
                fmt::format("step times not strictly increasing at step {}", t + 1));
    }
}

EnsembleMatrix::EnsembleMatrix(SeriesId id, Eigen::MatrixXd values)
    : id_(std::move(id)), values_(std::move(values)) {
    if (values_.rows() < 1) throw std::invalid_argument("ensemble needs at least one model");
}

EnsembleMatrix EnsembleMatrix::select_models(const std::vector<std::size_t>& rows) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n_models()) throw std::out_of_range("model index out of range");
        out.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return EnsembleMatrix(id_, std::move(out));
}

ValidatedPair validate_pair(ObservationSeries obs, EnsembleMatrix ens) {
    if (ens.n_steps() != obs.size()) throw LengthMismatch(obs.size(), ens.n_steps());
    if (!(obs.id() == ens.id()))
        throw IdMismatch(fmt::format("series id mismatch: '{}' vs '{}'", obs.id().well_label,
                                     ens.id().well_label));
    for (std::size_t t = 0; t < obs.size(); ++t) {
        if (!std::isfinite(obs[t])) throw NonFiniteValue(0, t + 1);
    }
    const auto& m = ens.values();
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        for (Eigen::Index t = 0; t < m.cols(); ++t) {
            if (!std::isfinite(m(j, t)))
                throw NonFiniteValue(static_cast<std::size_t>(j) + 1, static_cast<std::size_t>(t) + 1);
        }
    }
    return ValidatedPair(std::move(obs), std::move(ens));
}

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::ewa: return "ewa";
        case Algorithm::ridge: return "ridge";
        case Algorithm::lasso: return "lasso";
        case Algorithm::uniform: return "uniform";
    }
    return "uniform";
}

Algorithm algorithm_from_string(const std::string& text) {
    if (text == "ewa") return Algorithm::ewa;
    if (text == "ridge") return Algorithm::ridge;
    if (text == "lasso") return Algorithm::lasso;
    if (text == "uniform") return Algorithm::uniform;
    throw UnsupportedAlgorithm("unknown algorithm: " + text);
}

bool on_simplex(const Eigen::VectorXd& w) {
    if (w.size() == 0) return false;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (!(w[j] >= 0.0)) return false;
    }
    return std::abs(w.sum() - 1.0) <= kSimplexTolerance;
}

void WeightVector::check() const {
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        if (!std::isfinite(weights[j]))
            throw std::invalid_argument(fmt::format("weight {} is not finite", j + 1));
    }
    if (flavor == WeightFlavor::convex && !on_simplex(weights))
        throw std::invalid_argument("convex weight vector is not on the simplex");
}

WeightVector WeightVector::uniform(std::size_t n_models, Algorithm algorithm, WeightFlavor flavor,
                                   double hyperparameter, std::size_t step) {
    WeightVector w;
    w.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_models),
                                          1.0 / static_cast<double>(n_models));
    w.flavor = flavor;
    w.algorithm = algorithm;
    w.hyperparameter = hyperparameter;
    w.step = step;
    return w;
}

void AggregationTrace::append(std::size_t step, WeightVector weights, double forecast,
                              double observation, double hyperparameter) {
    const std::size_t expected = records_.empty() ? 1 : records_.back().step + 1;
    if (step != expected)
        throw std::invalid_argument(fmt::format("trace steps must be contiguous: expected {}, got {}",
                                                expected, step));
    TraceRecord r;
    r.step = step;
    r.weights = std::move(weights);
    r.forecast = forecast;
    r.observation = observation;
    r.loss = (forecast - observation) * (forecast - observation);
    r.hyperparameter = hyperparameter;
    r.cumulative_loss = cumulative_loss() + r.loss;
    records_.push_back(std::move(r));
}

std::vector<double> AggregationTrace::forecasts() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.forecast);
    return out;
}

std::vector<double> AggregationTrace::observations() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.observation);
    return out;
}

}  // namespace seqagg
