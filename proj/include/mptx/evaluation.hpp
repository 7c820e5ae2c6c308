#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mptx/adversarial.hpp"
#include "mptx/attribution.hpp"
#include "mptx/baselines.hpp"
#include "mptx/corpus.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

// ---- good explanation -------------------------------------------------------

/// Number of strictly positive entries.
std::size_t positive_count(std::span<const double> values);

/// positive / activated > threshold, over the attributions of the activated
/// tokens. Throws for an empty span.
bool good_explanation(std::span<const double> activated_attribution, double threshold);

/// One explained adversarial sample.
struct ExplainedCandidate {
    double benign_score = 0.0;
    std::vector<double> activated_attribution;  // one entry per activated token
};

/// Attributions of `candidate.activated` looked up in a vector aligned to `vocab`.
std::vector<double> activated_attribution(const AdversarialCandidate& candidate, const Vocabulary& vocab,
                                          std::span<const double> attribution);

/// 0.0, 0.1, ..., 0.9
std::vector<double> default_thresholds();

struct GoodSampleDetail {
    std::size_t activated = 0;
    std::size_t positive = 0;
};

struct GoodExplanationResult {
    std::vector<double> thresholds;
    std::vector<double> fractions;  // 0 for an empty input
    std::vector<GoodSampleDetail> samples;
};

GoodExplanationResult sweep_good_explanation(std::span<const ExplainedCandidate> candidates,
                                             std::span<const double> thresholds = {});

// ---- functional analysis ----------------------------------------------------

struct CountBin {
    std::size_t lo = 0;
    std::optional<std::size_t> hi;  // nullopt: unbounded
    std::string label() const;      // "(0,30]" or "50+"
    bool contains(std::size_t count) const { return count > lo && (!hi || count <= *hi); }
};

/// (0,30], (30,50], 50+
std::vector<CountBin> activated_count_bins();

struct FunctionalCell {
    std::size_t population = 0;
    std::size_t good = 0;
    /// nullopt for an empty cell, reported as "n/a".
    std::optional<double> fraction() const {
        if (population == 0) return std::nullopt;
        return static_cast<double>(good) / static_cast<double>(population);
    }
};

struct FunctionalBins {
    std::vector<ScoreBin> score_bins;
    std::vector<CountBin> count_bins;
    std::vector<std::vector<FunctionalCell>> cells;  // [score_bin][count_bin]
    std::size_t outside = 0;  // samples with a benign score outside (0.5, 1.0]
};

FunctionalBins functional_analysis(std::span<const ExplainedCandidate> candidates, double good_threshold);

// ---- fidelity ---------------------------------------------------------------

/// Attribution of x for the given class, aligned to x.
using Explainer = std::function<std::vector<double>(const FeatureVector& x, Label target)>;

struct ExplainerOptions {
    ExplainMethod method = ExplainMethod::mpt;
    ExplainConfig mpt;
    LimeConfig lime;
    KernelShapConfig kshap;
};

Explainer make_explainer(const Scorer& scorer, const ExplainerOptions& options);

/// Indices of the n highest-attributed features among those non-zero in x;
/// ties keep index order.
std::vector<std::size_t> top_present_features(std::span<const double> attribution, const FeatureVector& x,
                                              std::size_t n);

enum class FidelityMode { deduction, augmentation };
std::string_view to_string(FidelityMode mode) noexcept;
FidelityMode parse_fidelity_mode(std::string_view text);

struct FidelityCurve {
    FidelityMode mode = FidelityMode::deduction;
    std::vector<std::size_t> n;  // 0..max_features, truncated at the dimension
    std::vector<double> pcr;
    std::size_t samples = 0;   // explained samples contributing to every point
    std::size_t skipped = 0;   // inputs not classified as their label
};

/// Zeroes the top-n attributed present features of every correctly classified
/// sample; PCR(n) is the fraction still classified as its label.
FidelityCurve deduction_test(std::span<const LabeledVector> dataset, const Scorer& scorer,
                             const Explainer& explainer, std::size_t max_features, std::size_t workers = 1);

/// Copies the top-n attributed present features of each correctly detected
/// malware sample i into benign sample i mod |benign|, overwriting; PCR(n) is
/// the fraction classified as malware.
FidelityCurve augmentation_test(std::span<const LabeledVector> malware, std::span<const LabeledVector> benign,
                                const Scorer& scorer, const Explainer& explainer, std::size_t max_features,
                                std::size_t workers = 1);

// ---- classification ---------------------------------------------------------

struct ClassificationReport {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    std::optional<double> tpr;
    std::optional<double> fpr;
    std::optional<double> mcc;
    std::string mcc_note;  // reason when mcc is null
};

/// Malware is the positive class.
ClassificationReport classify_metrics(std::span<const Label> truth, std::span<const Label> predicted);
ClassificationReport classify_metrics(const Scorer& scorer, std::span<const LabeledVector> dataset);

}  // namespace mptx
