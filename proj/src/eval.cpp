#include "seqagg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace seqagg {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

void check_window(std::size_t n_steps, std::size_t burn_in) {
    if (burn_in >= n_steps)
        throw std::invalid_argument(fmt::format("burn-in {} leaves no step out of {}", burn_in, n_steps));
}

// Evaluated window as a design matrix: rows = steps burn_in+1..T, columns = models.
Eigen::MatrixXd window_design(const ValidatedPair& pair, std::size_t burn_in) {
    const auto& m = pair.ensemble().values();
    return m.rightCols(idx(pair.n_steps() - burn_in)).transpose();
}

Eigen::VectorXd window_targets(const ValidatedPair& pair, std::size_t burn_in) {
    const auto& y = pair.observations().values();
    Eigen::VectorXd out(idx(y.size() - burn_in));
    for (std::size_t t = burn_in; t < y.size(); ++t) out[idx(t - burn_in)] = y[t];
    return out;
}

double trace_average_loss(const AggregationTrace& trace) {
    if (trace.empty()) throw std::invalid_argument("empty trace");
    double total = 0.0;
    for (const auto& r : trace.records()) total += (r.forecast - r.observation) * (r.forecast - r.observation);
    return total / static_cast<double>(trace.size());
}

void check_trace_matches(const ValidatedPair& pair, const AggregationTrace& trace) {
    if (trace.size() != pair.n_steps()) throw LengthMismatch(pair.n_steps(), trace.size());
}

}  // namespace

std::size_t default_burn_in(std::size_t n_steps) { return n_steps / 4; }

double rmse(std::span<const double> forecasts, std::span<const double> observations, std::size_t burn_in) {
    if (forecasts.size() != observations.size()) throw LengthMismatch(observations.size(), forecasts.size());
    check_window(observations.size(), burn_in);
    double total = 0.0;
    for (std::size_t t = burn_in; t < observations.size(); ++t) {
        const double e = forecasts[t] - observations[t];
        total += e * e;
    }
    return std::sqrt(total / static_cast<double>(observations.size() - burn_in));
}

BestModel best_model(const ValidatedPair& pair, std::size_t burn_in) {
    check_window(pair.n_steps(), burn_in);
    const auto& m = pair.ensemble().values();
    const auto& y = pair.observations().values();
    BestModel best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < pair.n_models(); ++j) {
        std::vector<double> row(y.size());
        for (std::size_t t = 0; t < y.size(); ++t) row[t] = m(idx(j), idx(t));
        const double r = rmse(row, y, burn_in);
        if (r < best.rmse) best = {j, r};
    }
    return best;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += sorted[static_cast<std::size_t>(i)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
        if (sorted[static_cast<std::size_t>(i)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

namespace {

// Least squares over the affine hull of the support: w sums to one, and the last
// support column is eliminated so the rest is an ordinary least-squares problem.
Eigen::VectorXd affine_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                     const std::vector<Eigen::Index>& support) {
    const auto p = static_cast<Eigen::Index>(support.size());
    Eigen::VectorXd w(p);
    if (p == 1) {
        w[0] = 1.0;
        return w;
    }
    const Eigen::VectorXd last = design.col(support.back());
    Eigen::MatrixXd reduced(design.rows(), p - 1);
    for (Eigen::Index i = 0; i + 1 < p; ++i) reduced.col(i) = design.col(support[static_cast<std::size_t>(i)]) - last;
    const Eigen::VectorXd u = reduced.completeOrthogonalDecomposition().solve(targets - last);
    w.head(p - 1) = u;
    w[p - 1] = 1.0 - u.sum();
    return w;
}

}  // namespace

ConvexOracle best_convex_oracle(const ValidatedPair& pair, std::size_t burn_in) {
    check_window(pair.n_steps(), burn_in);
    const Eigen::MatrixXd design = window_design(pair, burn_in);
    const Eigen::VectorXd targets = window_targets(pair, burn_in);
    const double count = static_cast<double>(targets.size());
    const Eigen::Index n = design.cols();

    auto objective = [&](const Eigen::VectorXd& v) { return (design * v - targets).squaredNorm() / count; };
    auto gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return 2.0 * design.transpose() * (design * v - targets) / count;
    };

    // Active-set method on the simplex, started at the best vertex. A model enters
    // the support when its partial derivative is below the average g^T v; the support
    // problem is then solved over its affine hull and, when that leaves the simplex,
    // the iterate moves to the boundary and the blocking models leave.
    Eigen::Index start = 0;
    double f_start = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        const double f = objective(Eigen::VectorXd::Unit(n, j));
        if (f < f_start) {
            f_start = f;
            start = j;
        }
    }
    Eigen::VectorXd x = Eigen::VectorXd::Unit(n, start);
    std::vector<Eigen::Index> support{start};
    Eigen::VectorXd g = gradient(x);
    std::size_t it = 0;
    while (it < kConvexOracleMaxIterations) {
        const double scale = 1.0 + g.cwiseAbs().maxCoeff();
        Eigen::Index entering = -1;
        double most_negative = g.dot(x) - 1e-14 * scale;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::find(support.begin(), support.end(), j) != support.end()) continue;
            if (g[j] < most_negative) {
                most_negative = g[j];
                entering = j;
            }
        }
        if (entering < 0) break;
        support.push_back(entering);

        while (it < kConvexOracleMaxIterations) {
            ++it;
            const Eigen::VectorXd w = affine_least_squares(design, targets, support);
            double alpha = 1.0;
            for (std::size_t i = 0; i < support.size(); ++i) {
                const double v = x[support[i]];
                if (w[static_cast<Eigen::Index>(i)] <= 0.0) alpha = std::min(alpha, v / (v - w[static_cast<Eigen::Index>(i)]));
            }
            std::vector<Eigen::Index> kept;
            Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
            for (std::size_t i = 0; i < support.size(); ++i) {
                const Eigen::Index j = support[i];
                const double v = x[j] + alpha * (w[static_cast<Eigen::Index>(i)] - x[j]);
                if (alpha == 1.0 ? v > 0.0 : v > 1e-15) {
                    next[j] = v;
                    kept.push_back(j);
                }
            }
            if (kept.empty()) break;
            next /= next.sum();
            x = next;
            support = kept;
            if (alpha == 1.0) break;
        }
        g = gradient(x);
    }

    double fx = objective(x);
    double gap = g.dot(x) - g.minCoeff();
    // a vertex can only win through rounding near the optimum, but it is feasible too
    if (f_start < fx) {
        x = Eigen::VectorXd::Unit(n, start);
        fx = f_start;
        g = gradient(x);
        gap = g.dot(x) - g.minCoeff();
    }
    const double scale = 1.0 + g.cwiseAbs().maxCoeff();
    if (gap > 1e-6 * scale)
        throw NoConvergence("convex oracle did not reach first-order optimality", gap);

    ConvexOracle out;
    out.weights.weights = x;
    out.weights.flavor = WeightFlavor::convex;
    out.weights.algorithm = Algorithm::uniform;
    out.rmse = std::sqrt(fx);
    out.duality_gap = gap;
    out.iterations = it;
    return out;
}

RmseReport make_rmse_report(const ValidatedPair& pair, const AggregationTrace& trace, std::size_t burn_in) {
    check_trace_matches(pair, trace);
    RmseReport r;
    r.id = pair.observations().id();
    r.algorithm = trace.empty() ? Algorithm::uniform : trace[0].weights.algorithm;
    r.burn_in = burn_in;
    r.rmse_algorithm = rmse(trace.forecasts(), pair.observations().values(), burn_in);
    const BestModel best = best_model(pair, burn_in);
    r.rmse_best_model = best.rmse;
    r.best_model_index = best.index;
    ConvexOracle oracle = best_convex_oracle(pair, burn_in);
    r.rmse_best_convex = oracle.rmse;
    r.convex_oracle_weights = std::move(oracle.weights);
    return r;
}

void BoundReport::enforce() const {
    if (!passed)
        throw BoundViolated(fmt::format("{} regret bound violated: average loss {:.17g} > bound {:.17g}",
                                        algorithm, average_loss, bound));
}

double data_bound(const ValidatedPair& pair) {
    double b = pair.ensemble().values().cwiseAbs().maxCoeff();
    for (double y : pair.observations().values()) b = std::max(b, std::abs(y));
    return b;
}

double ewa_epsilon(std::size_t n_models, std::size_t n_steps, double eta, double bound) {
    const double base = std::log(static_cast<double>(n_models)) / (eta * static_cast<double>(n_steps));
    if (eta <= 1.0 / (2.0 * bound * bound)) return base;
    return base + eta * bound * bound / 8.0;
}

double ridge_epsilon(std::size_t n_models, std::size_t n_steps, double lambda, double radius, double bound) {
    const double n = static_cast<double>(n_models);
    const double t = static_cast<double>(n_steps);
    const double b2 = bound * bound;
    return (lambda * radius * radius + 4.0 * n * b2 * (1.0 + n * b2 * t / lambda) * std::log1p(b2 * t / lambda) +
            5.0 * b2) /
           t;
}

BoundReport check_ewa_bound(const ValidatedPair& pair, const AggregationTrace& trace, double eta) {
    check_trace_matches(pair, trace);
    BoundReport r;
    r.algorithm = "ewa";
    r.average_loss = trace_average_loss(trace);
    r.data_bound = data_bound(pair);
    r.epsilon = ewa_epsilon(pair.n_models(), trace.size(), eta, r.data_bound);
    const auto& m = pair.ensemble().values();
    const auto& y = pair.observations().values();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        double total = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) total += (m(j, idx(t)) - y[t]) * (m(j, idx(t)) - y[t]);
        best = std::min(best, total / static_cast<double>(y.size()));
    }
    r.comparator_loss = best;
    r.bound = r.epsilon + r.comparator_loss;
    r.margin = r.bound - r.average_loss;
    r.passed = r.margin >= 0.0;
    return r;
}

double ball_comparator_loss(const ValidatedPair& pair, double radius) {
    const Eigen::MatrixXd design = window_design(pair, 0);
    const Eigen::VectorXd targets = window_targets(pair, 0);
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd moment = design.transpose() * targets;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    const Eigen::VectorXd mu = solver.eigenvalues();
    const Eigen::VectorXd beta = solver.eigenvectors().transpose() * moment;
    const double cutoff = 1e-12 * std::max(1.0, mu.cwiseAbs().maxCoeff());

    // The moment lies in the range of the gram matrix, so null directions carry no
    // signal and the minimum-norm minimizer is the relevant unconstrained one.
    auto solution = [&](double shift) {
        Eigen::VectorXd coords = Eigen::VectorXd::Zero(mu.size());
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            if (mu[i] > cutoff) coords[i] = beta[i] / (mu[i] + shift);
        }
        return Eigen::VectorXd(solver.eigenvectors() * coords);
    };
    Eigen::VectorXd v = solution(0.0);
    if (v.norm() > radius) {
        // ||v(shift)|| decreases in shift; it is below the radius once shift >= |beta| / radius.
        double lo = 0.0;
        double hi = beta.norm() / radius;
        for (int i = 0; i < 400 && hi - lo > 1e-10 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (solution(mid).norm() > radius) lo = mid; else hi = mid;
        }
        v = solution(hi);
    }
    return (design * v - targets).squaredNorm() / static_cast<double>(targets.size());
}

BoundReport check_ridge_bound(const ValidatedPair& pair, const AggregationTrace& trace, double lambda,
                              double radius) {
    check_trace_matches(pair, trace);
    if (radius < 1.0) throw std::invalid_argument("ridge bound needs a ball radius V >= 1");
    BoundReport r;
    r.algorithm = "ridge";
    r.average_loss = trace_average_loss(trace);
    r.data_bound = data_bound(pair);
    r.epsilon = ridge_epsilon(pair.n_models(), trace.size(), lambda, radius, r.data_bound);
    r.comparator_loss = ball_comparator_loss(pair, radius);
    r.bound = r.epsilon + r.comparator_loss;
    r.margin = r.bound - r.average_loss;
    r.passed = r.margin >= 0.0;
    return r;
}

}  // namespace seqagg
