#include "seqagg/interval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "seqagg/aggregators.hpp"
#include "seqagg/core.hpp"

namespace seqagg {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

// Interval of (z - m)^2 over z in [a, b].
Interval squared_distance_range(const Interval& z, double m) {
    const double to_lo = (z.lo - m) * (z.lo - m);
    const double to_hi = (z.hi - m) * (z.hi - m);
    const double low = z.contains(m) ? 0.0 : std::min(to_lo, to_hi);
    return {low, std::max(to_lo, to_hi)};
}

IntervalSeries finish(IntervalSeries out, double sigma_max) {
    out.sigma_applied = sigma_max;
    out.intervals.resize(out.raw.size());
    for (std::size_t k = 0; k < out.raw.size(); ++k) {
        const Interval e = enlarge(out.raw[k], sigma_max);
        out.intervals[k] = {e.lo + out.shift, e.hi + out.shift};
    }
    return out;
}

void check_inputs(const IntervalProblem& problem, const ScenarioCone& cone) {
    if (problem.learning.empty()) throw InsufficientHistory("interval forecast needs learning observations");
    if (static_cast<std::size_t>(problem.forecasts.cols()) <= problem.learning_steps())
        throw std::invalid_argument("interval forecast needs model forecasts past the learning part");
    if (cone.horizon() != problem.horizon())
        throw LengthMismatch(problem.horizon(), cone.horizon());
}

}  // namespace

Interval enlarge(const Interval& x, double sigma) {
    const double c = x.center();
    return {std::min(x.lo, c - sigma), std::max(x.hi, c + sigma)};
}

ConeSlope ConeSlope::widened(double factor) const {
    const double c = 0.5 * (down + up);
    const double h = 0.5 * (up - down);
    return {c - factor * h, c + factor * h};
}

Clamp Clamp::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("clamp must be lo:hi, got '" + text + "'");
    Clamp c;
    const std::string lo = text.substr(0, colon);
    const std::string hi = text.substr(colon + 1);
    if (!lo.empty()) c.lo = std::stod(lo);
    if (!hi.empty()) c.hi = std::stod(hi);
    if (c.lo > c.hi) throw std::invalid_argument("clamp lo exceeds hi");
    return c;
}

ScenarioCone make_cone(double anchor, ConeSlope slope, std::size_t horizon, Clamp clamp) {
    if (slope.down > slope.up) throw std::invalid_argument("cone slope: down exceeds up");
    ScenarioCone cone;
    cone.anchor = anchor;
    cone.slope = slope;
    cone.clamp = clamp;
    cone.intervals.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        const double kk = static_cast<double>(k);
        const double lo = std::max(anchor + kk * slope.down, clamp.lo);
        const double hi = std::min(anchor + kk * slope.up, clamp.hi);
        if (lo > hi) throw EmptyCone(k, lo, hi);
        cone.intervals.push_back({lo, hi});
    }
    return cone;
}

ConeSlope scan_slopes(std::span<const double> learning, const Eigen::MatrixXd& prediction_forecasts) {
    constexpr std::size_t w = kVariationWindow;
    if (learning.size() < w + 1)
        throw InsufficientHistory(fmt::format("cone needs at least {} learning steps, got {}", w + 1,
                                              learning.size()));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto visit = [&](double variation) {
        lo = std::min(lo, variation);
        hi = std::max(hi, variation);
    };
    for (std::size_t t = 0; t + w < learning.size(); ++t) visit((learning[t + w] - learning[t]) / double(w));
    const Eigen::Index cols = prediction_forecasts.cols();
    for (Eigen::Index j = 0; j < prediction_forecasts.rows(); ++j) {
        for (Eigen::Index t = 0; t + idx(w) < cols; ++t)
            visit((prediction_forecasts(j, t + idx(w)) - prediction_forecasts(j, t)) / double(w));
    }
    return {lo, hi};
}

ScenarioCone build_cone(std::span<const double> learning, const Eigen::MatrixXd& prediction_forecasts,
                        Clamp clamp) {
    const ConeSlope slope = scan_slopes(learning, prediction_forecasts);
    return make_cone(learning.back(), slope, static_cast<std::size_t>(prediction_forecasts.cols()), clamp);
}

NoiseEstimate estimate_noise(std::span<const double> learning, double stability_threshold,
                             std::size_t window) {
    if (!(stability_threshold > 0.0)) throw std::invalid_argument("stability threshold must be positive");
    NoiseEstimate est;
    est.stability_threshold = stability_threshold;
    est.stability_window = window;
    const std::size_t n = learning.size();
    if (n < 5) return est;
    for (std::size_t t = 2; t + 2 < n; ++t) {
        const std::size_t first = t >= window ? t - window : 0;
        const std::size_t last = std::min(n - 1, t + window);
        bool stable = true;
        for (std::size_t s = first; s <= last && stable; ++s)
            stable = std::abs(learning[t] - learning[s]) <= stability_threshold;
        if (!stable) continue;
        est.stable_steps.push_back(t + 1);
        const double local_mean =
            (learning[t - 2] + learning[t - 1] + learning[t] + learning[t + 1] + learning[t + 2]) / 5.0;
        est.sigma_max = std::max(est.sigma_max, std::abs(learning[t] - local_mean));
    }
    return est;
}

ModelFilter filter_models(std::span<const double> learning, const Eigen::MatrixXd& learning_forecasts) {
    if (learning.empty()) throw InsufficientHistory("model filter needs learning observations");
    if (static_cast<std::size_t>(learning_forecasts.cols()) != learning.size())
        throw LengthMismatch(learning.size(), static_cast<std::size_t>(learning_forecasts.cols()));
    ModelFilter f;
    const auto n = static_cast<double>(learning.size());
    for (Eigen::Index j = 0; j < learning_forecasts.rows(); ++j) {
        double sse = 0.0;
        for (std::size_t t = 0; t < learning.size(); ++t) {
            const double e = learning_forecasts(j, idx(t)) - learning[t];
            sse += e * e;
        }
        f.rmse.push_back(std::sqrt(sse / n));
    }
    f.best_rmse = *std::min_element(f.rmse.begin(), f.rmse.end());
    f.zero_rmse_best = f.best_rmse == 0.0;
    for (std::size_t j = 0; j < f.rmse.size(); ++j) {
        if (f.rmse[j] <= kFilterFactor * f.best_rmse) f.kept.push_back(j);
    }
    return f;
}

std::size_t IntervalProblem::horizon() const {
    const auto cols = static_cast<std::size_t>(forecasts.cols());
    return cols > learning.size() ? cols - learning.size() : 0;
}

Eigen::MatrixXd IntervalProblem::prediction_forecasts() const {
    return forecasts.rightCols(idx(horizon()));
}

Eigen::MatrixXd IntervalProblem::learning_forecasts() const {
    return forecasts.leftCols(idx(learning.size()));
}

IntervalProblem IntervalProblem::select_models(const std::vector<std::size_t>& rows) const {
    IntervalProblem out;
    out.learning = learning;
    out.matching_observation = matching_observation;
    out.forecasts.resize(idx(rows.size()), forecasts.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= static_cast<std::size_t>(forecasts.rows())) throw std::out_of_range("model row out of range");
        out.forecasts.row(idx(i)) = forecasts.row(idx(rows[i]));
    }
    return out;
}

IntervalSeries ridge_interval_forecast(const IntervalProblem& problem, const ScenarioCone& cone,
                                       double lambda, double sigma_max) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ridge interval: lambda must be positive");
    check_inputs(problem, cone);
    const std::size_t n_models = static_cast<std::size_t>(problem.forecasts.rows());
    const std::size_t t1 = problem.learning_steps();
    const std::size_t horizon = problem.horizon();
    const auto& m = problem.forecasts;

    IntervalSeries out;
    out.first_step = t1 + 1;

    // One-step run over the learning part: mismatches Delta_t for the last steps.
    std::vector<double> learning_mismatch(t1, 0.0);
    LeastSquaresStats stats(n_models);
    for (std::size_t t = 0; t < t1; ++t) {
        const Eigen::VectorXd column = m.col(idx(t));
        if (t + 4 >= t1) {
            const WeightVector w = stats.steps_seen == 0
                                       ? WeightVector::uniform(n_models, Algorithm::ridge, WeightFlavor::linear, lambda, t + 1)
                                       : ridge_weights(stats, RidgeSpectrum(stats), lambda, t + 1);
            learning_mismatch[t] = aggregate(w, column) - problem.learning[t];
        }
        stats.add(problem.learning[t], column);
    }
    const Eigen::VectorXd fixed_moment = stats.moment;

    out.raw.resize(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        const Eigen::VectorXd target = m.col(idx(t1 + k));
        // u = (lambda I + G_k)^{-1} m_{T+k}; the forecast is u . (b_0 + sum_{s<k} z_s m_{T+s}).
        const Eigen::VectorXd u = RidgeSpectrum(stats).solve(lambda, target);
        double lo = u.dot(fixed_moment);
        double hi = lo;
        for (std::size_t s = 0; s < k; ++s) {
            const double c = u.dot(m.col(idx(t1 + s)));
            const double a = c * cone.intervals[s].lo;
            const double b = c * cone.intervals[s].hi;
            lo += std::min(a, b);
            hi += std::max(a, b);
        }
        out.raw[k] = {lo, hi};
        // the gram matrix does not depend on the scenario; only the moment does
        if (k + 1 < horizon) stats.add(0.0, target);
    }

    if (problem.matching_observation) {
        for (std::size_t t = t1 >= 4 ? t1 - 4 : 0; t < t1; ++t) out.mismatches.push_back(learning_mismatch[t]);
        out.mismatches.push_back(out.raw[0].center() - *problem.matching_observation);
        const double mean = std::accumulate(out.mismatches.begin(), out.mismatches.end(), 0.0) /
                            static_cast<double>(out.mismatches.size());
        out.shift = -mean;
    }
    return finish(std::move(out), sigma_max);
}

double extreme_over_box(const WeightBox& box, const Eigen::VectorXd& x, bool maximize) {
    const Eigen::Index n = x.size();
    const double lo_sum = box.lo.sum();
    const double hi_sum = box.hi.sum();
    constexpr double slack = 1e-9;
    if (lo_sum > 1.0 + slack || hi_sum < 1.0 - slack)
        throw InfeasibleWeightBox(fmt::format("weight box misses the simplex: sum lo = {}, sum hi = {}",
                                              lo_sum, hi_sum));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return maximize ? x[a] > x[b] : x[a] < x[b];
    });
    double value = box.lo.dot(x);
    double remaining = 1.0 - lo_sum;
    for (Eigen::Index j : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(box.hi[j] - box.lo[j], remaining);
        value += add * x[j];
        remaining -= add;
    }
    return value;
}

IntervalSeries ewa_interval_forecast(const IntervalProblem& problem, const ScenarioCone& cone,
                                     double eta, double sigma_max) {
    if (!(eta > 0.0)) throw std::invalid_argument("ewa interval: eta must be positive");
    check_inputs(problem, cone);
    const Eigen::Index n = problem.forecasts.rows();
    const std::size_t t1 = problem.learning_steps();
    const std::size_t horizon = problem.horizon();
    const auto& m = problem.forecasts;

    Eigen::VectorXd loss_lo = Eigen::VectorXd::Zero(n);
    for (std::size_t t = 0; t < t1; ++t)
        loss_lo.array() += (m.col(idx(t)).array() - problem.learning[t]).square();
    Eigen::VectorXd loss_hi = loss_lo;

    IntervalSeries out;
    out.first_step = t1 + 1;
    out.raw.resize(horizon);
    WeightBox box{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (std::size_t k = 0; k < horizon; ++k) {
        if (k > 0) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const Interval d = squared_distance_range(cone.intervals[k - 1], m(j, idx(t1 + k - 1)));
                loss_lo[j] += d.lo;
                loss_hi[j] += d.hi;
            }
        }
        // w_j >= 1 / (1 + sum_{i != j} exp(-eta (Lmin_i - Lmax_j))), symmetrically for the upper bound.
        for (Eigen::Index j = 0; j < n; ++j) {
            double lower_denominator = 1.0;
            double upper_denominator = 1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i == j) continue;
                lower_denominator += std::exp(-eta * (loss_lo[i] - loss_hi[j]));
                upper_denominator += std::exp(-eta * (loss_hi[i] - loss_lo[j]));
            }
            box.lo[j] = 1.0 / lower_denominator;
            box.hi[j] = 1.0 / upper_denominator;
        }
        const Eigen::VectorXd target = m.col(idx(t1 + k));
        out.raw[k] = {extreme_over_box(box, target, false), extreme_over_box(box, target, true)};
    }

    if (problem.matching_observation) {
        out.mismatches.push_back(out.raw[0].center() - *problem.matching_observation);
        out.shift = -out.mismatches.back();
    }
    return finish(std::move(out), sigma_max);
}

}  // namespace seqagg
