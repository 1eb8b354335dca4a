#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqagg {

// Error hierarchy. Every failure raised by the library derives from Error so
// callers (the CLI in particular) can catch one type and report the message.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t expected, std::size_t actual);
    std::size_t expected;
    std::size_t actual;
};

class IdMismatch : public Error {
public:
    using Error::Error;
};

/// Indices are 1-based: `row` is the model (0 for an observation series),
/// `column` the step.
class NonFiniteValue : public Error {
public:
    NonFiniteValue(std::size_t row, std::size_t column);
    std::size_t row;
    std::size_t column;
};

class SolveFailure : public Error {
public:
    SolveFailure(const std::string& what, std::size_t step = 0);
    std::size_t step;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual);
    double residual;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class EmptyCone : public Error {
public:
    EmptyCone(std::size_t k, double lo, double hi);
    std::size_t k;
};

class InfeasibleWeightBox : public Error {
public:
    using Error::Error;
};

class BoundViolated : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& detail);
    std::size_t line;
};

class NonContiguousSteps : public Error {
public:
    NonContiguousSteps(const std::string& path, std::size_t expected_step);
    std::size_t expected_step;
};

class UnsupportedAlgorithm : public Error {
public:
    using Error::Error;
};

enum class PropertyKind { bottomhole_pressure, oil_rate, water_rate, other };

std::string to_string(PropertyKind kind);
PropertyKind property_kind_from_string(const std::string& text);

struct SeriesId {
    PropertyKind kind = PropertyKind::other;
    std::string well_label;
    std::string units;

    SeriesId() = default;
    SeriesId(PropertyKind kind, std::string well_label, std::string units);

    bool operator==(const SeriesId&) const = default;
};

/// Reference measurements y_1..y_T of one property at one well. Steps are an
/// abstract integer grid; `step_times` is carried along as metadata only.
class ObservationSeries {
public:
    ObservationSeries(SeriesId id, std::vector<double> values, std::vector<double> step_times);

    const SeriesId& id() const { return id_; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& step_times() const { return step_times_; }
    /// 0-based access.
    double operator[](std::size_t t) const { return values_[t]; }

private:
    SeriesId id_;
    std::vector<double> values_;
    std::vector<double> step_times_;
};

/// N x T matrix of model forecasts m_{j,t}; row = model, column = step.
class EnsembleMatrix {
public:
    EnsembleMatrix(SeriesId id, Eigen::MatrixXd values);

    const SeriesId& id() const { return id_; }
    std::size_t n_models() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_steps() const { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& values() const { return values_; }
    /// Forecasts of every model at 0-based step t.
    Eigen::VectorXd column(std::size_t t) const { return values_.col(static_cast<Eigen::Index>(t)); }

    EnsembleMatrix select_models(const std::vector<std::size_t>& rows) const;

private:
    SeriesId id_;
    Eigen::MatrixXd values_;
};

/// An observation series and an ensemble that have passed validate_pair.
/// Only validate_pair constructs one, so every holder may rely on matching
/// shapes, matching ids and finite data.
class ValidatedPair {
public:
    const ObservationSeries& observations() const { return obs_; }
    const EnsembleMatrix& ensemble() const { return ens_; }
    std::size_t n_steps() const { return obs_.size(); }
    std::size_t n_models() const { return ens_.n_models(); }

private:
    friend ValidatedPair validate_pair(ObservationSeries obs, EnsembleMatrix ens);
    ValidatedPair(ObservationSeries obs, EnsembleMatrix ens)
        : obs_(std::move(obs)), ens_(std::move(ens)) {}

    ObservationSeries obs_;
    EnsembleMatrix ens_;
};

/// Reports the first violation: LengthMismatch, IdMismatch, NonFiniteValue.
ValidatedPair validate_pair(ObservationSeries obs, EnsembleMatrix ens);

enum class WeightFlavor { convex, linear };
enum class Algorithm { ewa, ridge, lasso, uniform };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& text);

inline constexpr double kSimplexTolerance = 1e-9;

/// True when `w` is nonnegative and sums to one within kSimplexTolerance.
bool on_simplex(const Eigen::VectorXd& w);

struct WeightVector {
    Eigen::VectorXd weights;
    WeightFlavor flavor = WeightFlavor::linear;
    Algorithm algorithm = Algorithm::uniform;
    double hyperparameter = 0.0;
    std::size_t step = 0;

    std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
    /// Throws std::invalid_argument if the flavor's invariant does not hold.
    void check() const;

    static WeightVector uniform(std::size_t n_models, Algorithm algorithm,
                                WeightFlavor flavor, double hyperparameter, std::size_t step);
};

struct TraceRecord {
    std::size_t step = 0;  // 1-based
    WeightVector weights;
    double forecast = 0.0;
    double observation = 0.0;
    double loss = 0.0;
    double hyperparameter = 0.0;
    double cumulative_loss = 0.0;
};

/// Per-step output of an online run. Steps are contiguous starting at 1.
class AggregationTrace {
public:
    void append(std::size_t step, WeightVector weights, double forecast, double observation,
                double hyperparameter);

    const std::vector<TraceRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const TraceRecord& operator[](std::size_t i) const { return records_[i]; }
    double cumulative_loss() const { return records_.empty() ? 0.0 : records_.back().cumulative_loss; }

    std::vector<double> forecasts() const;
    std::vector<double> observations() const;

private:
    std::vector<TraceRecord> records_;
};

}  // namespace seqagg
