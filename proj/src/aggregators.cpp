#include "seqagg/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace seqagg {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

bool all_finite(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

double soft_threshold(double x, double threshold) {
    if (x > threshold) return x - threshold;
    if (x < -threshold) return x + threshold;
    return 0.0;
}

}  // namespace

LeastSquaresStats::LeastSquaresStats(std::size_t n_models)
    : gram(Eigen::MatrixXd::Zero(idx(n_models), idx(n_models))),
      moment(Eigen::VectorXd::Zero(idx(n_models))) {}

void LeastSquaresStats::add(double y, const Eigen::VectorXd& column) {
    if (column.size() != moment.size()) throw LengthMismatch(n_models(), column.size());
    gram.noalias() += column * column.transpose();
    moment += y * column;
    sum_sq_obs += y * y;
    ++steps_seen;
}

RidgeSpectrum::RidgeSpectrum(const LeastSquaresStats& stats) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(stats.gram);
    if (solver.info() != Eigen::Success) throw SolveFailure("eigendecomposition of gram matrix failed");
    basis_ = solver.eigenvectors();
    // The gram matrix is PSD; negative eigenvalues are rounding noise.
    eigenvalues_ = solver.eigenvalues().cwiseMax(0.0);
    projected_moment_ = basis_.transpose() * stats.moment;
}

namespace {

Eigen::VectorXd spectral_solve(const Eigen::MatrixXd& basis, const Eigen::VectorXd& eigenvalues,
                               const Eigen::VectorXd& projected, double lambda) {
    Eigen::VectorXd scaled(projected.size());
    for (Eigen::Index i = 0; i < scaled.size(); ++i) {
        const double pivot = eigenvalues[i] + lambda;
        if (!(pivot > 0.0)) throw SolveFailure(fmt::format("singular ridge system (lambda = {})", lambda));
        scaled[i] = projected[i] / pivot;
    }
    Eigen::VectorXd w = basis * scaled;
    if (!all_finite(w)) throw SolveFailure(fmt::format("non-finite ridge weights (lambda = {})", lambda));
    return w;
}

}  // namespace

Eigen::VectorXd RidgeSpectrum::solve(double lambda) const {
    return spectral_solve(basis_, eigenvalues_, projected_moment_, lambda);
}

Eigen::VectorXd RidgeSpectrum::solve(double lambda, const Eigen::VectorXd& rhs) const {
    if (rhs.size() != basis_.rows()) throw LengthMismatch(static_cast<std::size_t>(basis_.rows()), rhs.size());
    return spectral_solve(basis_, eigenvalues_, basis_.transpose() * rhs, lambda);
}

RidgeState::RidgeState(std::size_t n_models, double lambda) : lambda_(lambda), stats_(n_models) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
}

WeightVector ridge_weights(const LeastSquaresStats& stats, const RidgeSpectrum& spectrum,
                           double lambda, std::size_t step) {
    if (stats.steps_seen == 0)
        return WeightVector::uniform(stats.n_models(), Algorithm::ridge, WeightFlavor::linear, lambda, step);
    WeightVector w;
    w.weights = spectrum.solve(lambda);
    w.flavor = WeightFlavor::linear;
    w.algorithm = Algorithm::ridge;
    w.hyperparameter = lambda;
    w.step = step;
    return w;
}

WeightVector ridge_weights(const RidgeState& state, std::size_t step) {
    if (state.steps_seen() == 0)
        return WeightVector::uniform(state.stats().n_models(), Algorithm::ridge, WeightFlavor::linear,
                                     state.lambda(), step);
    return ridge_weights(state.stats(), RidgeSpectrum(state.stats()), state.lambda(), step);
}

EwaState::EwaState(std::size_t n_models, double eta)
    : eta_(eta), losses_(Eigen::VectorXd::Zero(idx(n_models))) {
    if (!(eta > 0.0)) throw std::invalid_argument("ewa: eta must be positive");
}

void EwaState::update(double y, const Eigen::VectorXd& column) {
    if (column.size() != losses_.size()) throw LengthMismatch(static_cast<std::size_t>(losses_.size()), column.size());
    losses_.array() += (column.array() - y).square();
    ++steps_seen_;
}

Eigen::VectorXd ewa_distribution(const Eigen::VectorXd& cumulative_losses, double eta) {
    const Eigen::Index n = cumulative_losses.size();
    const double shift = cumulative_losses.minCoeff();
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j) w[j] = std::exp(-eta * (cumulative_losses[j] - shift));
    const double total = w.sum();
    // The minimizing model contributes exp(0) = 1, so total >= 1 unless a loss is NaN.
    if (!(total > 0.0) || !std::isfinite(total))
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return w / total;
}

WeightVector ewa_weights(const EwaState& state, std::size_t step) {
    const std::size_t n = static_cast<std::size_t>(state.cumulative_losses().size());
    if (state.steps_seen() == 0)
        return WeightVector::uniform(n, Algorithm::ewa, WeightFlavor::convex, state.eta(), step);
    WeightVector w;
    w.weights = ewa_distribution(state.cumulative_losses(), state.eta());
    w.flavor = WeightFlavor::convex;
    w.algorithm = Algorithm::ewa;
    w.hyperparameter = state.eta();
    w.step = step;
    return w;
}

LassoKkt lasso_kkt(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                   const Eigen::VectorXd& v) {
    const Eigen::VectorXd gradient = 2.0 * (gram * v - moment);
    LassoKkt kkt;
    double max_grad = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        const double g = gradient[j];
        max_grad = std::max(max_grad, std::abs(g));
        double violation = 0.0;
        if (v[j] > 0.0) {
            violation = std::abs(g + lambda);
        } else if (v[j] < 0.0) {
            violation = std::abs(g - lambda);
        } else {
            violation = std::max(0.0, std::abs(g) - lambda);
        }
        kkt.max_violation = std::max(kkt.max_violation, violation);
    }
    kkt.scale = 1.0 + std::abs(lambda) + max_grad;
    return kkt;
}

double lasso_objective(const LeastSquaresStats& stats, double lambda, const Eigen::VectorXd& v) {
    const double quadratic = v.dot(stats.gram * v) - 2.0 * stats.moment.dot(v) + stats.sum_sq_obs;
    return lambda * v.lpNorm<1>() + quadratic;
}

namespace {

// One refinement step on the current support A with sign pattern s. On that orthant
// the objective is the quadratic v^T G v - 2 (b - lambda s / 2)^T v, so the iterate
// moves toward its minimizer over A (or, when G_AA is singular and the linear term
// reaches its null space, along a null direction, where the objective decreases
// linearly) and stops where the first coordinate reaches zero. The objective never
// increases. Returns true when the full step to the support minimizer was taken.
bool support_step(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda, Eigen::VectorXd& v) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) support.push_back(j);
    const auto p = static_cast<Eigen::Index>(support.size());
    if (p == 0) return false;

    Eigen::MatrixXd g(p, p);
    Eigen::VectorXd c(p);
    Eigen::VectorXd current(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        const Eigen::Index j = support[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < p; ++b) g(a, b) = gram(j, support[static_cast<std::size_t>(b)]);
        current[a] = v[j];
        c[a] = moment[j] - 0.5 * lambda * (v[j] > 0.0 ? 1.0 : -1.0);
    }

    Eigen::VectorXd direction;
    bool bounded = true;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double top = pivots.cwiseAbs().maxCoeff();
    if (ldlt.info() == Eigen::Success && top > 0.0 && pivots.minCoeff() > 1e-12 * top) {
        direction = ldlt.solve(c) - current;
    } else {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
        const Eigen::VectorXd& mu = eig.eigenvalues();
        const Eigen::MatrixXd& q = eig.eigenvectors();
        const double cutoff = 1e-12 * std::max(mu.cwiseAbs().maxCoeff(), 0.0);
        Eigen::VectorXd coords = q.transpose() * c;
        Eigen::VectorXd null_part = Eigen::VectorXd::Zero(p);
        for (Eigen::Index i = 0; i < p; ++i)
            if (mu[i] <= cutoff) null_part[i] = coords[i];
        if (null_part.norm() > 1e-12 * c.norm()) {
            direction = q * null_part;
            bounded = false;
        } else {
            Eigen::VectorXd keep = q.transpose() * current;
            for (Eigen::Index i = 0; i < p; ++i) keep[i] = mu[i] <= cutoff ? keep[i] : coords[i] / mu[i];
            direction = q * keep - current;
        }
    }

    double alpha = bounded ? 1.0 : std::numeric_limits<double>::infinity();
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < p; ++a) {
        if (current[a] * direction[a] >= 0.0) continue;
        const double reach = -current[a] / direction[a];
        if (reach < alpha) {
            alpha = reach;
            blocking = a;
        }
    }
    if (!std::isfinite(alpha)) return false;
    for (Eigen::Index a = 0; a < p; ++a) {
        const Eigen::Index j = support[static_cast<std::size_t>(a)];
        v[j] = a == blocking ? 0.0 : current[a] + alpha * direction[a];
        if (v[j] * current[a] < 0.0) v[j] = 0.0;
    }
    return blocking < 0;
}

}  // namespace

LassoSolution polish_lasso(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                           Eigen::VectorXd start, std::size_t max_sweeps) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be positive");
    const Eigen::Index n = moment.size();
    if (start.size() != n) start = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd& v = start;
    // residual correlation r = b - G v, kept in sync with every coordinate move
    Eigen::VectorXd r = moment - gram * v;
    const double threshold = 0.5 * lambda;

    LassoSolution out;
    out.converged = false;
    out.sweeps = max_sweeps;
    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double diag = gram(j, j);
            const double old = v[j];
            const double updated = diag > 0.0 ? soft_threshold(r[j] + diag * old, threshold) / diag : 0.0;
            const double delta = updated - old;
            if (delta != 0.0) {
                v[j] = updated;
                r.noalias() -= delta * gram.col(j);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (max_change < kLassoTolerance * (1.0 + v.cwiseAbs().maxCoeff())) {
            out.sweeps = sweep;
            out.converged = true;
            break;
        }
        if (sweep % kLassoRefineEvery == 0) {
            // each blocked step drops one coordinate
            for (Eigen::Index k = 0; k < n && !support_step(gram, moment, lambda, v); ++k) {
            }
            r = moment - gram * v;
        }
    }
    out.kkt = lasso_kkt(gram, moment, lambda, v);
    out.weights = std::move(v);
    return out;
}

LassoSolution solve_lasso(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment, double lambda,
                          Eigen::VectorXd start) {
    LassoSolution out = polish_lasso(gram, moment, lambda, std::move(start), kLassoMaxSweeps);
    if (!out.converged)
        throw NoConvergence(fmt::format("lasso coordinate descent hit {} sweeps (lambda = {})", kLassoMaxSweeps, lambda),
                            out.kkt.relative());
    return out;
}

LassoHistory::LassoHistory(std::size_t n_models) : design(0, idx(n_models)) {}

void LassoHistory::add(double y, const Eigen::VectorXd& column) {
    if (column.size() != design.cols()) throw LengthMismatch(static_cast<std::size_t>(design.cols()), column.size());
    const Eigen::Index t = design.rows();
    design.conservativeResize(t + 1, Eigen::NoChange);
    design.row(t) = column.transpose();
    observed.conservativeResize(t + 1);
    observed[t] = y;
}

LassoPath::LassoPath(const LassoHistory& history)
    : design_(history.design), observed_(history.observed), v_(Eigen::VectorXd::Zero(history.design.cols())) {
    const Eigen::Index n = design_.cols();
    const Eigen::Index rank_cap = std::min(design_.rows(), n);
    q_.resize(design_.rows(), rank_cap);
    r_.resize(rank_cap, rank_cap);
    blocked_.assign(static_cast<std::size_t>(n), 0);
    if (n == 0 || design_.rows() == 0) {
        done_ = true;
        return;
    }
    const Eigen::VectorXd b = design_.transpose() * observed_;
    Eigen::Index first = 0;
    h_max_ = b.cwiseAbs().maxCoeff(&first);
    h_ = h_max_;
    if (h_max_ == 0.0 || !add_column(first)) {
        done_ = true;
        return;
    }
    active_.push_back(first);
    signs_.push_back(b[first] > 0.0 ? 1.0 : -1.0);
}

bool LassoPath::add_column(Eigen::Index j) {
    const auto p = idx(active_.size());
    if (p >= q_.cols()) return false;
    const auto x = design_.col(j);
    const auto q = q_.leftCols(p);
    // Gram-Schmidt, twice
    Eigen::VectorXd coef = q.transpose() * x;
    Eigen::VectorXd w = x - q * coef;
    const Eigen::VectorXd again = q.transpose() * w;
    w -= q * again;
    coef += again;
    const double rho = w.norm();
    if (!(rho > kLassoCollinear * x.norm())) return false;
    q_.col(p) = w / rho;
    r_.col(p).head(p) = coef;
    r_(p, p) = rho;
    return true;
}

void LassoPath::remove_column(std::size_t a) {
    const auto p = idx(active_.size());
    const auto k = idx(a);
    for (Eigen::Index c = k; c + 1 < p; ++c) r_.col(c).head(p) = r_.col(c + 1).head(p);
    // restore the triangle left behind by the shift
    for (Eigen::Index i = k; i + 1 < p; ++i) {
        Eigen::JacobiRotation<double> rot;
        rot.makeGivens(r_(i, i), r_(i + 1, i));
        auto r = r_.topLeftCorner(p, p - 1);
        r.applyOnTheLeft(i, i + 1, rot.adjoint());
        auto q = q_.leftCols(p);
        q.applyOnTheRight(i, i + 1, rot);
        r_(i + 1, i) = 0.0;
    }
    active_.erase(active_.begin() + k);
    signs_.erase(signs_.begin() + k);
}

// Feature-sign steps at fixed h. Solve on the active set and signs,
// R w = Q^T y - R^{-T} (h s), then move from the current point toward w and stop at
// whichever of w and the zero crossings on the way has the lowest objective.
// Models that land on zero leave. The objective falls every round.
void LassoPath::resolve_active() {
    const auto objective = [&](const Eigen::VectorXd& x) {
        const auto p = x.size();
        const Eigen::VectorXd fitted = q_.leftCols(p) * (r_.topLeftCorner(p, p).triangularView<Eigen::Upper>() * x);
        return 0.5 * (observed_ - fitted).squaredNorm() + h_ * x.lpNorm<1>();
    };
    const std::size_t rounds = 4 * static_cast<std::size_t>(design_.cols()) + 10;
    for (std::size_t round = 0; round < rounds && !active_.empty(); ++round) {
        const auto p = idx(active_.size());
        Eigen::VectorXd s(p), current(p);
        for (Eigen::Index a = 0; a < p; ++a) {
            s[a] = signs_[static_cast<std::size_t>(a)];
            current[a] = v_[active_[static_cast<std::size_t>(a)]];
        }
        const auto r = r_.topLeftCorner(p, p).triangularView<Eigen::Upper>();
        const Eigen::VectorXd rhs = q_.leftCols(p).transpose() * observed_ - r.transpose().solve(h_ * s);
        const Eigen::VectorXd w = r.solve(rhs);
        if (!w.allFinite()) return;
        if ((w.array() * s.array() > 0.0).all()) {
            for (Eigen::Index a = 0; a < p; ++a) v_[active_[static_cast<std::size_t>(a)]] = w[a];
            return;
        }
        Eigen::VectorXd best_point = w;
        double best = objective(w);
        for (Eigen::Index a = 0; a < p; ++a) {
            if (current[a] == 0.0 || current[a] * w[a] >= 0.0) continue;
            Eigen::VectorXd x = current + current[a] / (current[a] - w[a]) * (w - current);
            x[a] = 0.0;
            const double f = objective(x);
            if (f < best) {
                best = f;
                best_point = std::move(x);
            }
        }
        const bool progress = best < objective(current);
        if (!progress) best_point = current;
        for (Eigen::Index a = p - 1; a >= 0; --a) {
            const auto k = static_cast<std::size_t>(a);
            const Eigen::Index j = active_[k];
            v_[j] = best_point[a];
            if (best_point[a] == 0.0) {
                remove_column(k);
                if (!progress) blocked_[static_cast<std::size_t>(j)] = 1;
            } else {
                signs_[k] = best_point[a] > 0.0 ? 1.0 : -1.0;
            }
        }
        if (!progress) return;
    }
}

bool LassoPath::extend() {
    if (done_) return false;
    const Eigen::Index n = design_.cols();
    const auto p = idx(active_.size());
    if (segments_.size() > 20 * static_cast<std::size_t>(n) + 100 || ++events_ > 50 * static_cast<std::size_t>(n) + 200) {
        done_ = stalled_ = true;
        return false;
    }

    Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd fitted_direction = Eigen::VectorXd::Zero(design_.rows());
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(design_.rows());
    if (p > 0) {
        Eigen::VectorXd s(p);
        for (Eigen::Index a = 0; a < p; ++a) s[a] = signs_[static_cast<std::size_t>(a)];
        const auto r = r_.topLeftCorner(p, p).triangularView<Eigen::Upper>();
        const Eigen::VectorXd z = r.transpose().solve(s);
        const Eigen::VectorXd d_active = r.solve(z);
        fitted_direction = q_.leftCols(p) * z;
        for (Eigen::Index a = 0; a < p; ++a) {
            const Eigen::Index j = active_[static_cast<std::size_t>(a)];
            direction[j] = d_active[a];
            fitted += v_[j] * design_.col(j);
        }
    }
    if (!direction.allFinite()) {
        done_ = stalled_ = true;
        return false;
    }
    const Eigen::VectorXd slope = design_.transpose() * fitted_direction;
    const Eigen::VectorXd corr = design_.transpose() * (observed_ - fitted);

    std::vector<char> is_active(static_cast<std::size_t>(n), 0);
    for (Eigen::Index j : active_) is_active[static_cast<std::size_t>(j)] = 1;

    // The correlations of active models shrink as h - gamma; an inactive model
    // enters when |corr_j - gamma slope_j| catches up with them, at once if it
    // already has.
    double gamma = h_;
    Eigen::Index entering = -1;
    double entering_sign = 0.0;
    bool forced = false;
    Eigen::Index leaving = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (is_active[static_cast<std::size_t>(j)] || blocked_[static_cast<std::size_t>(j)] || j == just_dropped_)
            continue;
        if (std::abs(corr[j]) > h_ * (1.0 + 1e-9)) {
            if (gamma > 0.0 || entering < 0) {
                gamma = 0.0;
                entering = j;
                entering_sign = corr[j] > 0.0 ? 1.0 : -1.0;
                forced = true;
            }
            continue;
        }
        if (1.0 - slope[j] > 1e-12) {
            const double step = std::max(0.0, (h_ - corr[j]) / (1.0 - slope[j]));
            if (step < gamma) {
                gamma = step;
                entering = j;
                entering_sign = 1.0;
                forced = false;
            }
        }
        if (1.0 + slope[j] > 1e-12) {
            const double step = std::max(0.0, (h_ + corr[j]) / (1.0 + slope[j]));
            if (step < gamma) {
                gamma = step;
                entering = j;
                entering_sign = -1.0;
                forced = false;
            }
        }
    }
    for (std::size_t a = 0; a < active_.size(); ++a) {
        const Eigen::Index j = active_[a];
        if (v_[j] * direction[j] >= 0.0) continue;
        const double step = std::max(0.0, -v_[j] / direction[j]);
        if (step < gamma) {
            gamma = step;
            leaving = idx(a);
            entering = -1;
        }
    }

    if (gamma > 0.0) segments_.push_back({h_, h_ - gamma, v_, direction});
    v_ += gamma * direction;
    h_ -= gamma;
    just_dropped_ = -1;
    if (leaving >= 0) {
        const Eigen::Index j = active_[static_cast<std::size_t>(leaving)];
        v_[j] = 0.0;
        remove_column(static_cast<std::size_t>(leaving));
        just_dropped_ = j;
        std::fill(blocked_.begin(), blocked_.end(), 0);
    } else if (entering >= 0) {
        if (add_column(entering)) {
            active_.push_back(entering);
            signs_.push_back(entering_sign);
            if (forced) resolve_active();
        } else {
            blocked_[static_cast<std::size_t>(entering)] = 1;
        }
    } else if (std::find(blocked_.begin(), blocked_.end(), 1) != blocked_.end() && unblocked_at_ != h_) {
        // held-out models get one more look before the path ends
        std::fill(blocked_.begin(), blocked_.end(), 0);
        unblocked_at_ = h_;
    } else {
        h_ = 0.0;
    }
    if (h_ <= 0.0) {
        h_ = 0.0;
        done_ = true;
    }
    return true;
}

Eigen::VectorXd LassoPath::at(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso: lambda must be nonnegative");
    const double h = 0.5 * lambda;
    if (h >= h_max_) return Eigen::VectorXd::Zero(design_.cols());
    while (h < h_ && extend()) {
    }
    // segments are ordered by decreasing h
    const auto it = std::lower_bound(segments_.begin(), segments_.end(), h,
                                     [](const Segment& seg, double value) { return seg.h_end > value; });
    if (it == segments_.end()) return v_;
    return it->start + (it->h_start - h) * it->direction;
}

Eigen::VectorXd LassoPath::refit(double lambda, const Eigen::VectorXd& signs) const {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < signs.size(); ++j)
        if (signs[j] != 0.0) support.push_back(j);
    const auto p = idx(support.size());
    if (p == 0 || p > design_.rows()) return {};
    Eigen::MatrixXd x(design_.rows(), p);
    Eigen::VectorXd half_penalty(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        const Eigen::Index j = support[static_cast<std::size_t>(a)];
        x.col(a) = design_.col(j);
        half_penalty[a] = 0.5 * lambda * signs[j];
    }
    // X^T X w = X^T y - lambda s / 2 with X = Q R
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    for (Eigen::Index a = 0; a < p; ++a)
        if (!(std::abs(qr.matrixQR()(a, a)) > kLassoCollinear * x.col(a).norm())) return {};
    const auto r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qty = (qr.householderQ().transpose() * observed_).head(p);
    const Eigen::VectorXd w = r.solve(Eigen::VectorXd(qty - r.transpose().solve(half_penalty)));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(signs.size());
    for (Eigen::Index a = 0; a < p; ++a) out[support[static_cast<std::size_t>(a)]] = w[a];
    return out;
}

LassoState::LassoState(std::size_t n_models, double lambda) : lambda_(lambda), stats_(n_models), history_(n_models) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be positive");
}

void LassoState::update(double y, const Eigen::VectorXd& column) {
    stats_.add(y, column);
    history_.add(y, column);
}

WeightVector lasso_weights(const LeastSquaresStats& stats, LassoPath& path, double lambda, std::size_t step) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lasso: lambda must be positive");
    if (stats.steps_seen == 0)
        return WeightVector::uniform(stats.n_models(), Algorithm::lasso, WeightFlavor::linear, lambda, step);
    const Eigen::Index n = stats.moment.size();
    const double gram_max = stats.gram.cwiseAbs().maxCoeff();
    const double moment_max = stats.moment.cwiseAbs().maxCoeff();
    if (lambda >= 2.0 * moment_max) {
        WeightVector zero = WeightVector::uniform(stats.n_models(), Algorithm::lasso, WeightFlavor::linear, lambda, step);
        zero.weights.setZero();
        return zero;
    }
    // KKT violation over what is accepted; <= 1 passes
    const auto excess = [&](const Eigen::VectorXd& v) {
        if (v.size() != n || !v.allFinite()) return std::numeric_limits<double>::infinity();
        const LassoKkt kkt = lasso_kkt(stats.gram, stats.moment, lambda, v);
        // what double precision can resolve in G v - b
        const double rounding =
            64.0 * std::numeric_limits<double>::epsilon() * (gram_max * v.lpNorm<1>() + moment_max);
        return kkt.max_violation / std::max(kLassoPathTolerance * kkt.scale, rounding);
    };
    Eigen::VectorXd best = path.at(lambda);
    double best_excess = excess(best);
    const auto consider = [&](const Eigen::VectorXd& v) {
        const double e = excess(v);
        if (e < best_excess) {
            best = v;
            best_excess = e;
        }
    };

    // refit on the support, adding the worst inactive violator each round
    Eigen::VectorXd v = best;
    for (std::size_t round = 0; round < kLassoRepairRounds && best_excess > 1.0; ++round) {
        Eigen::VectorXd signs = v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        const Eigen::VectorXd gradient = 2.0 * (stats.gram * v - stats.moment);
        Eigen::Index worst = -1;
        double worst_excess = lambda;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (v[j] == 0.0 && std::abs(gradient[j]) > worst_excess) {
                worst = j;
                worst_excess = std::abs(gradient[j]);
            }
        }
        if (worst >= 0) signs[worst] = gradient[worst] > 0.0 ? -1.0 : 1.0;
        Eigen::VectorXd candidate = path.refit(lambda, signs);
        if (candidate.size() != n) break;
        consider(candidate);
        for (Eigen::Index j = 0; j < n; ++j)
            if (candidate[j] * signs[j] < 0.0) candidate[j] = 0.0;
        consider(candidate);
        v = std::move(candidate);
    }
    if (best_excess > 1.0) consider(polish_lasso(stats.gram, stats.moment, lambda, best, kLassoPolishSweeps).weights);

    WeightVector w;
    w.weights = std::move(best);
    w.flavor = WeightFlavor::linear;
    w.algorithm = Algorithm::lasso;
    w.hyperparameter = lambda;
    w.step = step;
    return w;
}

WeightVector lasso_weights(const LassoState& state, std::size_t step) {
    LassoPath path(state.history());
    return lasso_weights(state.stats(), path, state.lambda(), step);
}

double aggregate(const WeightVector& weights, const Eigen::VectorXd& column) {
    if (weights.weights.size() != column.size()) throw LengthMismatch(weights.size(), column.size());
    return weights.weights.dot(column);
}

namespace {

class UniformForecaster final : public OnlineForecaster {
public:
    explicit UniformForecaster(std::size_t n) : n_(n) {}
    Prediction predict(std::size_t step, const Eigen::VectorXd& column) override {
        Prediction p;
        p.weights = WeightVector::uniform(n_, Algorithm::uniform, WeightFlavor::convex, 0.0, step);
        p.forecast = aggregate(p.weights, column);
        return p;
    }
    void reveal(double, const Eigen::VectorXd&) override {}
    Algorithm algorithm() const override { return Algorithm::uniform; }

private:
    std::size_t n_;
};

class FixedEwa final : public OnlineForecaster {
public:
    FixedEwa(std::size_t n, double eta) : state_(n, eta) {}
    Prediction predict(std::size_t step, const Eigen::VectorXd& column) override {
        Prediction p;
        p.weights = ewa_weights(state_, step);
        p.forecast = aggregate(p.weights, column);
        p.hyperparameter = state_.eta();
        return p;
    }
    void reveal(double y, const Eigen::VectorXd& column) override { state_.update(y, column); }
    Algorithm algorithm() const override { return Algorithm::ewa; }

private:
    EwaState state_;
};

class FixedRidge final : public OnlineForecaster {
public:
    FixedRidge(std::size_t n, double lambda) : state_(n, lambda) {}
    Prediction predict(std::size_t step, const Eigen::VectorXd& column) override {
        Prediction p;
        p.weights = ridge_weights(state_, step);
        p.forecast = aggregate(p.weights, column);
        p.hyperparameter = state_.lambda();
        return p;
    }
    void reveal(double y, const Eigen::VectorXd& column) override { state_.update(y, column); }
    Algorithm algorithm() const override { return Algorithm::ridge; }

private:
    RidgeState state_;
};

class FixedLasso final : public OnlineForecaster {
public:
    FixedLasso(std::size_t n, double lambda) : state_(n, lambda) {}
    Prediction predict(std::size_t step, const Eigen::VectorXd& column) override {
        Prediction p;
        p.weights = lasso_weights(state_, step);
        p.forecast = aggregate(p.weights, column);
        p.hyperparameter = state_.lambda();
        return p;
    }
    void reveal(double y, const Eigen::VectorXd& column) override { state_.update(y, column); }
    Algorithm algorithm() const override { return Algorithm::lasso; }

private:
    LassoState state_;
};

}  // namespace

std::unique_ptr<OnlineForecaster> make_fixed_forecaster(Algorithm algorithm, std::size_t n_models,
                                                        double hyperparameter) {
    switch (algorithm) {
        case Algorithm::ewa: return std::make_unique<FixedEwa>(n_models, hyperparameter);
        case Algorithm::ridge: return std::make_unique<FixedRidge>(n_models, hyperparameter);
        case Algorithm::lasso: return std::make_unique<FixedLasso>(n_models, hyperparameter);
        case Algorithm::uniform: return std::make_unique<UniformForecaster>(n_models);
    }
    throw UnsupportedAlgorithm("unknown algorithm");
}

AggregationTrace run_online(const ValidatedPair& pair, OnlineForecaster& forecaster) {
    const auto& obs = pair.observations();
    const auto& ens = pair.ensemble();
    AggregationTrace trace;
    for (std::size_t t = 0; t < pair.n_steps(); ++t) {
        const Eigen::VectorXd column = ens.column(t);
        Prediction p;
        try {
            p = forecaster.predict(t + 1, column);
        } catch (const SolveFailure& e) {
            throw SolveFailure(e.what(), t + 1);
        } catch (const Error& e) {
            throw SolveFailure(e.what(), t + 1);
        }
        trace.append(t + 1, std::move(p.weights), p.forecast, obs[t], p.hyperparameter);
        forecaster.reveal(obs[t], column);
    }
    return trace;
}

}  // namespace seqagg
