#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mptx/corpus.hpp"
#include "mptx/perturbation.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

/// Sample covariance of the response rows plus a ridge on the diagonal.
struct CovarianceMatrix {
    Eigen::MatrixXd q;
    double lambda = 0.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(q.rows()); }
};

/// Scale-aware ridge: max(1e-6 * trace(raw) / m, 1e-9).
double default_ridge(const Eigen::MatrixXd& raw);

/// q[i][j] = sum_k (r_ik - mu_i)(r_jk - mu_j) / (K - 1), plus lambda * I.
/// With no lambda given, default_ridge of the raw covariance is used.
CovarianceMatrix covariance(const Eigen::MatrixXd& responses, std::optional<double> lambda = std::nullopt);
CovarianceMatrix covariance(const ResponseMatrix& responses, std::optional<double> lambda = std::nullopt);

enum class QpMethod {
    active_set,          // exact primal active-set method (default)
    projected_gradient,  // fixed-step projected gradient with clipped-simplex projection
};

struct SolverOptions {
    QpMethod method = QpMethod::active_set;
    std::size_t max_iterations = 100000;
    double tolerance = 1e-10;
};

struct SolverStats {
    QpMethod method = QpMethod::active_set;
    std::size_t iterations = 0;
    double equality_residual = 0.0;  // |sum a - 1|
    double box_violation = 0.0;      // max over i of distance of a_i outside [-1, 1]
    double stationarity = 0.0;       // max |2(Qa)_i - nu| over free coordinates
    double min_multiplier = 0.0;     // most negative bound multiplier (>= 0 at optimum)
    double nu = 0.0;                 // equality multiplier
    std::size_t at_lower = 0;
    std::size_t at_upper = 0;
};

struct AttributionVector {
    std::vector<double> a;
    double objective = 0.0;  // a^T Q a
    SolverStats stats;

    std::size_t size() const noexcept { return a.size(); }
    double operator[](std::size_t i) const { return a[i]; }
};

/// Minimises a^T Q a subject to sum(a) = 1 and -1 <= a_i <= 1.
/// Throws Error(numerical, "singular covariance; increase lambda") when Q is
/// not positive definite. Feasibility is verified on every call.
AttributionVector solve_attribution(const CovarianceMatrix& q, const SolverOptions& options = {});

/// Euclidean projection onto {a : sum(a) = total, lo <= a_i <= hi} by
/// bisection on the shift t in clip(v - t, lo, hi).
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double total = 1.0,
                                       double lo = -1.0, double hi = 1.0);

struct ExplainConfig {
    std::size_t steps = kDefaultPerturbationSteps;
    std::optional<double> lambda;
    std::optional<Label> target;
    const Scorer* base_scorer = nullptr;  // see RespondOptions::base_scorer
    std::size_t workers = 1;
    std::size_t batch_size = 256;
    SolverOptions solver;
};

struct Explanation {
    AttributionVector attribution;
    Label target = Label::malware;
    double base_score = 0.0;
    double lambda = 0.0;
};

/// perturb -> respond -> covariance -> solve_attribution. The attribution is
/// aligned index-wise with the input vector.
Explanation explain(const FeatureVector& x, const Scorer& scorer, const ExplainConfig& config = {});

struct RankedFeature {
    std::size_t index = 0;
    double attribution = 0.0;
};

/// Stable order: attribution descending, then index ascending. `top` = 0 keeps all.
std::vector<RankedFeature> rank_features(std::span<const double> attribution, std::size_t top = 0);

}  // namespace mptx
