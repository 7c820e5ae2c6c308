#include "mptx/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mptx/error.hpp"

namespace mptx {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Bound : unsigned char { free, lower, upper };

constexpr double kLo = -1.0;
constexpr double kHi = 1.0;

[[noreturn]] void singular() {
    fail(ErrorCode::numerical, "singular covariance; increase lambda");
}

void check_positive_definite(const MatrixXd& q) {
    if (!q.allFinite()) {
        fail(ErrorCode::numerical, "covariance contains non-finite entries");
    }
    Eigen::LDLT<MatrixXd> ldlt(q);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        singular();
    }
    const VectorXd d = ldlt.vectorD();
    const double hi = d.cwiseAbs().maxCoeff();
    if (!(d.minCoeff() > 0.0) || d.minCoeff() <= 1e-14 * hi) {
        singular();
    }
}

void fill_stats(const MatrixXd& q, const VectorXd& a, const std::vector<Bound>& state, double nu,
                SolverStats& stats) {
    const VectorXd g = 2.0 * (q * a);
    stats.nu = nu;
    stats.equality_residual = std::abs(a.sum() - 1.0);
    stats.box_violation = 0.0;
    stats.stationarity = 0.0;
    stats.min_multiplier = 0.0;
    stats.at_lower = stats.at_upper = 0;
    for (Index i = 0; i < a.size(); ++i) {
        stats.box_violation = std::max({stats.box_violation, a[i] - kHi, kLo - a[i]});
        switch (state[static_cast<std::size_t>(i)]) {
            case Bound::free:
                stats.stationarity = std::max(stats.stationarity, std::abs(g[i] - nu));
                break;
            case Bound::upper:
                ++stats.at_upper;
                stats.min_multiplier = std::min(stats.min_multiplier, nu - g[i]);
                break;
            case Bound::lower:
                ++stats.at_lower;
                stats.min_multiplier = std::min(stats.min_multiplier, g[i] - nu);
                break;
        }
    }
}

// Equality multiplier when every coordinate sits on a bound: any nu inside
// [max g over upper, min g over lower] certifies optimality.
double bound_only_nu(const VectorXd& g, const std::vector<Bound>& state) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i] == Bound::upper) lo = std::max(lo, g[static_cast<Index>(i)]);
        if (state[i] == Bound::lower) hi = std::min(hi, g[static_cast<Index>(i)]);
    }
    if (std::isinf(lo)) return hi;
    if (std::isinf(hi)) return lo;
    return 0.5 * (lo + hi);
}

AttributionVector solve_active_set(const MatrixXd& q, const SolverOptions& options) {
    const Index m = q.rows();
    VectorXd a = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    std::vector<Bound> state(static_cast<std::size_t>(m), Bound::free);
    const double scale = std::max(q.diagonal().maxCoeff(), std::numeric_limits<double>::min());
    const double mult_tol = options.tolerance * scale;

    AttributionVector out;
    out.stats.method = QpMethod::active_set;
    double nu = 0.0;
    const std::size_t limit = std::min<std::size_t>(options.max_iterations, 20 * static_cast<std::size_t>(m) + 100);

    std::size_t iter = 0;
    for (; iter < limit; ++iter) {
        std::vector<Index> free_idx;
        std::vector<Index> bound_idx;
        for (Index i = 0; i < m; ++i) {
            (state[static_cast<std::size_t>(i)] == Bound::free ? free_idx : bound_idx).push_back(i);
        }

        bool stationary = false;
        if (free_idx.empty()) {
            nu = bound_only_nu(2.0 * (q * a), state);
            stationary = true;
        } else {
            const Index nf = static_cast<Index>(free_idx.size());
            MatrixXd qff(nf, nf);
            VectorXd h = VectorXd::Zero(nf);
            double rest = 1.0;
            for (Index r = 0; r < nf; ++r) {
                for (Index c = 0; c < nf; ++c) qff(r, c) = q(free_idx[r], free_idx[c]);
                for (Index b : bound_idx) h[r] += q(free_idx[r], b) * a[b];
            }
            for (Index b : bound_idx) rest -= a[b];

            Eigen::LLT<MatrixXd> llt(qff);
            if (llt.info() != Eigen::Success) singular();
            const VectorXd y = llt.solve(VectorXd::Ones(nf));
            const VectorXd z = llt.solve(h);
            const double half_nu = (rest + z.sum()) / y.sum();
            nu = 2.0 * half_nu;
            const VectorXd target = half_nu * y - z;

            VectorXd step(nf);
            for (Index r = 0; r < nf; ++r) step[r] = target[r] - a[free_idx[r]];

            if (step.cwiseAbs().maxCoeff() <= 1e-15) {
                stationary = true;
            } else {
                double t = 1.0;
                Index blocking = -1;
                Bound blocking_side = Bound::free;
                for (Index r = 0; r < nf; ++r) {
                    const double ai = a[free_idx[r]];
                    double ti = std::numeric_limits<double>::infinity();
                    Bound side = Bound::free;
                    if (step[r] > 0.0 && target[r] > kHi) {
                        ti = (kHi - ai) / step[r];
                        side = Bound::upper;
                    } else if (step[r] < 0.0 && target[r] < kLo) {
                        ti = (kLo - ai) / step[r];
                        side = Bound::lower;
                    }
                    if (ti < t) {
                        t = std::max(ti, 0.0);
                        blocking = free_idx[r];
                        blocking_side = side;
                    }
                }
                if (blocking < 0) {
                    for (Index r = 0; r < nf; ++r) a[free_idx[r]] = target[r];
                    stationary = true;
                } else {
                    for (Index r = 0; r < nf; ++r) a[free_idx[r]] += t * step[r];
                    a[blocking] = blocking_side == Bound::upper ? kHi : kLo;
                    state[static_cast<std::size_t>(blocking)] = blocking_side;
                    continue;
                }
            }
        }

        if (stationary) {
            const VectorXd g = 2.0 * (q * a);
            Index worst = -1;
            double worst_mult = -mult_tol;
            for (Index b : bound_idx) {
                const double mult = state[static_cast<std::size_t>(b)] == Bound::upper ? nu - g[b] : g[b] - nu;
                if (mult < worst_mult) {
                    worst_mult = mult;
                    worst = b;
                }
            }
            if (worst < 0) break;
            state[static_cast<std::size_t>(worst)] = Bound::free;
        }
    }
    if (iter >= limit) {
        fail(ErrorCode::numerical, "attribution solver did not converge in " + std::to_string(limit) + " iterations");
    }

    // Polish: exact bounds and the equality spread over free coordinates.
    std::size_t n_free = 0;
    for (Index i = 0; i < m; ++i) {
        a[i] = std::clamp(a[i], kLo, kHi);
        if (state[static_cast<std::size_t>(i)] == Bound::free) ++n_free;
    }
    if (n_free > 0) {
        const double gap = (1.0 - a.sum()) / static_cast<double>(n_free);
        for (Index i = 0; i < m; ++i) {
            if (state[static_cast<std::size_t>(i)] == Bound::free) a[i] = std::clamp(a[i] + gap, kLo, kHi);
        }
    }

    out.stats.iterations = iter + 1;
    fill_stats(q, a, state, nu, out.stats);
    out.a.assign(a.data(), a.data() + m);
    out.objective = a.dot(q * a);
    return out;
}

AttributionVector solve_projected_gradient(const MatrixXd& q, const SolverOptions& options) {
    const Index m = q.rows();
    // Gershgorin bound on the largest eigenvalue of Q; the gradient 2Qa is 2L-Lipschitz.
    const double lipschitz = 2.0 * q.cwiseAbs().rowwise().sum().maxCoeff();
    const double eta = 1.0 / lipschitz;

    VectorXd a = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    std::size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const VectorXd next = project_capped_simplex(a - eta * 2.0 * (q * a));
        const double moved = (next - a).norm() / eta;
        a = next;
        if (moved < options.tolerance) break;
    }

    AttributionVector out;
    out.stats.method = QpMethod::projected_gradient;
    out.stats.iterations = iter;
    std::vector<Bound> state(static_cast<std::size_t>(m), Bound::free);
    for (Index i = 0; i < m; ++i) {
        if (a[i] >= kHi) state[static_cast<std::size_t>(i)] = Bound::upper;
        else if (a[i] <= kLo) state[static_cast<std::size_t>(i)] = Bound::lower;
    }
    const VectorXd g = 2.0 * (q * a);
    double nu = 0.0;
    std::size_t n_free = 0;
    for (Index i = 0; i < m; ++i) {
        if (state[static_cast<std::size_t>(i)] == Bound::free) {
            nu += g[i];
            ++n_free;
        }
    }
    nu = n_free > 0 ? nu / static_cast<double>(n_free) : bound_only_nu(g, state);
    fill_stats(q, a, state, nu, out.stats);
    out.a.assign(a.data(), a.data() + m);
    out.objective = a.dot(q * a);
    return out;
}

}  // namespace

double default_ridge(const Eigen::MatrixXd& raw) {
    if (raw.rows() == 0) return 1e-9;
    return std::max(1e-6 * raw.trace() / static_cast<double>(raw.rows()), 1e-9);
}

CovarianceMatrix covariance(const Eigen::MatrixXd& responses, std::optional<double> lambda) {
    const Index m = responses.rows();
    const Index k = responses.cols();
    if (m == 0) {
        fail(ErrorCode::invalid_argument, "covariance of an empty response matrix");
    }
    if (k < 2) {
        fail(ErrorCode::invalid_argument, "covariance needs at least 2 perturbation steps");
    }
    if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) {
        fail(ErrorCode::invalid_argument, "lambda must be a finite non-negative number");
    }
    const MatrixXd centered = responses.colwise() - responses.rowwise().mean();
    MatrixXd raw = (centered * centered.transpose()) / static_cast<double>(k - 1);
    raw = 0.5 * (raw + raw.transpose()).eval();

    CovarianceMatrix out;
    out.lambda = lambda.value_or(default_ridge(raw));
    out.q = std::move(raw);
    out.q.diagonal().array() += out.lambda;
    return out;
}

CovarianceMatrix covariance(const ResponseMatrix& responses, std::optional<double> lambda) {
    return covariance(responses.r, lambda);
}

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double total, double lo, double hi) {
    const double m = static_cast<double>(v.size());
    if (v.size() == 0 || !(lo * m <= total + 1e-12 && total <= hi * m + 1e-12)) {
        fail(ErrorCode::invalid_argument, "capped simplex is empty");
    }
    auto mass = [&](double t) { return (v.array() - t).cwiseMax(lo).cwiseMin(hi).sum(); };
    // mass is non-increasing in t; bracket the root.
    double t_lo = v.minCoeff() - hi;
    double t_hi = v.maxCoeff() - lo;
    for (int i = 0; i < 200 && t_hi - t_lo > 0.0; ++i) {
        const double mid = 0.5 * (t_lo + t_hi);
        if (mid <= t_lo || mid >= t_hi) break;
        (mass(mid) > total ? t_lo : t_hi) = mid;
    }
    Eigen::VectorXd out = (v.array() - 0.5 * (t_lo + t_hi)).cwiseMax(lo).cwiseMin(hi);
    // Remove the residual bisection error on the interior coordinates.
    Index interior = 0;
    for (Index i = 0; i < out.size(); ++i) interior += (out[i] > lo && out[i] < hi) ? 1 : 0;
    if (interior > 0) {
        const double gap = (total - out.sum()) / static_cast<double>(interior);
        for (Index i = 0; i < out.size(); ++i) {
            if (out[i] > lo && out[i] < hi) out[i] = std::clamp(out[i] + gap, lo, hi);
        }
    }
    return out;
}

AttributionVector solve_attribution(const CovarianceMatrix& cov, const SolverOptions& options) {
    const auto& q = cov.q;
    if (q.rows() == 0 || q.rows() != q.cols()) {
        fail(ErrorCode::dimension_mismatch, "covariance must be a non-empty square matrix");
    }
    check_positive_definite(q);

    AttributionVector out;
    if (q.rows() == 1) {
        out.a = {1.0};
        out.objective = q(0, 0);
        out.stats.method = options.method;
        out.stats.nu = 2.0 * q(0, 0);
        out.stats.at_upper = 1;
    } else if (options.method == QpMethod::active_set) {
        out = solve_active_set(q, options);
    } else {
        out = solve_projected_gradient(q, options);
    }

    if (out.stats.equality_residual > 1e-8 || out.stats.box_violation > 1e-12) {
        fail(ErrorCode::numerical, "attribution solution is infeasible (sum residual " +
                                       std::to_string(out.stats.equality_residual) + ")");
    }
    return out;
}

Explanation explain(const FeatureVector& x, const Scorer& scorer, const ExplainConfig& config) {
    const auto set = perturb(x, config.steps);
    RespondOptions ro;
    ro.target = config.target;
    ro.base_scorer = config.base_scorer;
    ro.batch_size = config.batch_size;
    ro.workers = config.workers;
    const auto responses = respond(set, scorer, ro);
    const auto cov = covariance(responses, config.lambda);

    Explanation out;
    out.attribution = solve_attribution(cov, config.solver);
    out.target = responses.target;
    out.base_score = responses.base_score;
    out.lambda = cov.lambda;
    return out;
}

std::vector<RankedFeature> rank_features(std::span<const double> attribution, std::size_t top) {
    std::vector<RankedFeature> out(attribution.size());
    for (std::size_t i = 0; i < attribution.size(); ++i) out[i] = {i, attribution[i]};
    std::stable_sort(out.begin(), out.end(), [](const RankedFeature& l, const RankedFeature& r) {
        return l.attribution > r.attribution;
    });
    if (top > 0 && top < out.size()) out.resize(top);
    return out;
}

}  // namespace mptx
