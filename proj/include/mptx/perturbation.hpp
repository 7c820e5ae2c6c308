#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mptx/corpus.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

inline constexpr std::size_t kDefaultPerturbationSteps = 50;

/// Denominator floor for relative score changes; bases scoring below it are refused.
inline constexpr double kBaseScoreFloor = 1e-6;

/// K evenly spaced scalings per feature: point (i, k) equals the base vector
/// with coordinate i multiplied by alphas[k]. Points are built on demand.
class PerturbationSet {
public:
    PerturbationSet(FeatureVector base, std::size_t steps);

    const FeatureVector& base() const noexcept { return base_; }
    const std::vector<double>& alphas() const noexcept { return alphas_; }
    std::size_t features() const noexcept { return base_.size(); }
    std::size_t steps() const noexcept { return alphas_.size(); }
    std::size_t size() const noexcept { return features() * steps(); }

    /// Value of coordinate i at step k.
    double value(std::size_t feature, std::size_t step) const {
        return alphas_[step] * base_.values[feature];
    }
    FeatureVector point(std::size_t feature, std::size_t step) const;

private:
    FeatureVector base_;
    std::vector<double> alphas_;
};

/// alpha_k = k / (K - 1), k = 0..K-1. Throws for K < 2.
std::vector<double> alpha_schedule(std::size_t steps);

PerturbationSet perturb(const FeatureVector& base, std::size_t steps = kDefaultPerturbationSteps);

struct RespondOptions {
    std::optional<Label> target;  // default: the class predicted for the base
    /// Scores the base instead of the perturbing scorer when set, e.g. a
    /// teacher whose surrogate scores the perturbed points.
    const Scorer* base_scorer = nullptr;
    std::size_t batch_size = 256;
    std::size_t workers = 1;
};

struct ResponseMatrix {
    Eigen::MatrixXd r;       // m x K relative changes (f(x_ik) - f(x)) / f(x)
    Eigen::VectorXd mu;      // row means
    Eigen::MatrixXd scores;  // m x K target-class probabilities
    double base_score = 0.0;
    Label target = Label::malware;
};

/// Scores every perturbed point once (writing by (i, k) index) and forms the
/// relative-change matrix against the target-class probability of the base.
ResponseMatrix respond(const PerturbationSet& set, const Scorer& scorer,
                       const RespondOptions& options = {});

/// Debug table "feature,step,alpha,score" for every perturbed point.
void write_perturbation_csv(const PerturbationSet& set, const ResponseMatrix& responses,
                            const std::filesystem::path& path);

}  // namespace mptx
