#pragma once

// Reference computations used by the unit and acceptance tests. They are written
// from the definitions directly and share no code with the library solvers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "seqagg/core.hpp"

namespace oracle {

struct Instance {
    std::vector<double> y;  // T observations
    Eigen::MatrixXd m;      // N x T forecasts
    std::size_t n() const { return static_cast<std::size_t>(m.rows()); }
    std::size_t t() const { return y.size(); }
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t t, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Instance inst;
    inst.y.resize(t);
    inst.m.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
    for (std::size_t s = 0; s < t; ++s) {
        inst.y[s] = u(rng);
        for (std::size_t j = 0; j < n; ++j) inst.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) = u(rng);
    }
    return inst;
}

inline seqagg::ValidatedPair to_pair(const Instance& inst) {
    const seqagg::SeriesId id(seqagg::PropertyKind::other, "X", "u");
    std::vector<double> times(inst.t());
    for (std::size_t s = 0; s < times.size(); ++s) times[s] = static_cast<double>(s + 1);
    return seqagg::validate_pair(seqagg::ObservationSeries(id, inst.y, times), seqagg::EnsembleMatrix(id, inst.m));
}

// Penalized normal equations over the first `steps` steps, assembled entry by entry.
inline Eigen::VectorXd dense_ridge(const std::vector<double>& y, const Eigen::MatrixXd& m, std::size_t steps,
                                   double lambda) {
    const Eigen::Index n = m.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, i) = lambda;
        for (std::size_t s = 0; s < steps; ++s) rhs[i] += y[s] * m(i, static_cast<Eigen::Index>(s));
        for (Eigen::Index j = 0; j < n; ++j) {
            for (std::size_t s = 0; s < steps; ++s)
                a(i, j) += m(i, static_cast<Eigen::Index>(s)) * m(j, static_cast<Eigen::Index>(s));
        }
    }
    return a.fullPivLu().solve(rhs);
}

// lambda |v|_1 + sum_t (y_t - v . m_t)^2 evaluated from the raw data.
inline double lasso_objective(const std::vector<double>& y, const Eigen::MatrixXd& m, double lambda,
                              const Eigen::VectorXd& v) {
    double f = lambda * v.cwiseAbs().sum();
    for (std::size_t s = 0; s < y.size(); ++s) {
        const double r = y[s] - m.col(static_cast<Eigen::Index>(s)).dot(v);
        f += r * r;
    }
    return f;
}

// Subgradient method with steps 1 / (L sqrt(k + 1)), returning the best objective seen.
inline double subgradient_lasso(const std::vector<double>& y, const Eigen::MatrixXd& m, double lambda,
                                std::size_t iterations) {
    const Eigen::Index n = m.rows();
    const Eigen::Index t = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd x = m.leftCols(t).transpose();
    Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), t);
    const Eigen::MatrixXd g = x.transpose() * x;
    const Eigen::VectorXd b = x.transpose() * yy;
    const double c = yy.squaredNorm();
    const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff() + 1e-300;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    double best = c;
    for (std::size_t k = 0;; ++k) {
        const Eigen::VectorXd gv = g * v;
        best = std::min(best, lambda * v.cwiseAbs().sum() + v.dot(gv) - 2.0 * b.dot(v) + c);
        if (k == iterations) break;
        Eigen::VectorXd sub = 2.0 * (gv - b);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (v[j] > 0) sub[j] += lambda;
            else if (v[j] < 0) sub[j] -= lambda;
            else sub[j] -= std::clamp(sub[j], -lambda, lambda);
        }
        if (sub.squaredNorm() == 0.0) break;
        v -= sub / (lip * std::sqrt(static_cast<double>(k + 1)));
    }
    return best;
}

// Ridge forecast for step `steps + 1` after observing `z` on the first `steps` steps.
inline double ridge_forecast(const std::vector<double>& z, const Eigen::MatrixXd& m, std::size_t steps, double lambda) {
    const Eigen::VectorXd w = dense_ridge(z, m, steps, lambda);
    return w.dot(m.col(static_cast<Eigen::Index>(steps)));
}

// EWA forecast for step `steps + 1` after observing `z` on the first `steps` steps.
inline double ewa_forecast(const std::vector<double>& z, const Eigen::MatrixXd& m, std::size_t steps, double eta) {
    const Eigen::Index n = m.rows();
    std::vector<double> loss(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (std::size_t s = 0; s < steps; ++s) {
            const double e = m(j, static_cast<Eigen::Index>(s)) - z[s];
            loss[static_cast<std::size_t>(j)] += e * e;
        }
    }
    const double lmin = *std::min_element(loss.begin(), loss.end());
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = std::exp(-eta * (loss[static_cast<std::size_t>(j)] - lmin));
        num += w * m(j, static_cast<Eigen::Index>(steps));
        den += w;
    }
    return num / den;
}

// Mean squared error of the fixed combination v on steps burn_in+1..T.
inline double window_mse(const Instance& inst, std::size_t burn_in, const Eigen::VectorXd& v) {
    double s = 0.0;
    for (std::size_t t = burn_in; t < inst.t(); ++t) {
        const double e = inst.m.col(static_cast<Eigen::Index>(t)).dot(v) - inst.y[t];
        s += e * e;
    }
    return s / static_cast<double>(inst.t() - burn_in);
}

// Smallest window MSE over the barycentric grid {k / resolution} of the simplex.
inline double simplex_grid_mse(const Instance& inst, std::size_t burn_in, int resolution) {
    const int n = static_cast<int>(inst.n());
    std::vector<int> parts(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, int)> walk = [&](int j, int left) {
        if (j == n - 1) {
            parts[static_cast<std::size_t>(j)] = left;
            Eigen::VectorXd v(n);
            for (int i = 0; i < n; ++i) v[i] = static_cast<double>(parts[static_cast<std::size_t>(i)]) / resolution;
            best = std::min(best, window_mse(inst, burn_in, v));
            return;
        }
        for (int k = 0; k <= left; ++k) {
            parts[static_cast<std::size_t>(j)] = k;
            walk(j + 1, left - k);
        }
    };
    walk(0, resolution);
    return best;
}

}  // namespace oracle
