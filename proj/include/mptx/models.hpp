#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mptx/corpus.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

enum class ModelKind { linear_svm, rbf_svm };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

/// p_malware = sigmoid(slope * decision + offset); slope > 0 keeps it monotone.
struct Calibration {
    double slope = 1.0;
    double offset = 0.0;

    double p_malware(double decision) const noexcept;
    bool operator==(const Calibration&) const = default;
};

/// Platt-style logistic fit of labels on decision values (Newton with
/// smoothed targets). The returned slope is strictly positive.
Calibration fit_calibration(std::span<const double> decisions, std::span<const Label> labels);

struct Hyperparameters {
    double c = 1.0;      // hinge-loss weight; linear SGD uses lambda = 1 / (c * n)
    double gamma = 1.0;  // RBF width, exp(-gamma * |x - y|^2)
    bool operator==(const Hyperparameters&) const = default;
};

/// Held-out fidelity of a distilled model against its teacher.
struct SurrogateInfo {
    std::string teacher_kind;
    std::uint64_t teacher_fingerprint = 0;
    double agreement = 0.0;
    std::size_t holdout = 0;
    bool operator==(const SurrogateInfo&) const = default;
};

class TrainedModel final : public Scorer {
public:
    static TrainedModel make_linear(std::vector<double> weights, double bias, Hyperparameters hyper,
                                    Calibration calibration, std::uint64_t vocabulary);
    /// `support` rows are dense vectors; `coefficients` hold alpha_i * y_i
    /// with y = +1 for malware.
    static TrainedModel make_rbf(std::vector<std::vector<double>> support,
                                 std::vector<double> coefficients, double bias,
                                 Hyperparameters hyper, Calibration calibration,
                                 std::uint64_t vocabulary);

    std::size_t dimension() const override { return dimension_; }
    ClassScores score(std::span<const double> x) const override;
    ScorerInfo info() const override { return {std::string(to_string(kind_)), fingerprint_}; }
    using Scorer::score;

    /// Raw margin; positive means malware.
    double decision(std::span<const double> x) const;

    ModelKind kind() const noexcept { return kind_; }
    const Hyperparameters& hyperparameters() const noexcept { return hyper_; }
    const Calibration& calibration() const noexcept { return calibration_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& coefficients() const noexcept { return coef_; }
    std::size_t support_size() const noexcept { return coef_.size(); }
    std::span<const double> support_vector(std::size_t i) const;
    double bias() const noexcept { return bias_; }
    std::uint64_t vocabulary_fingerprint() const noexcept { return vocabulary_fp_; }
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    void set_calibration(Calibration calibration);

    const std::optional<SurrogateInfo>& surrogate() const noexcept { return surrogate_; }
    void set_surrogate(SurrogateInfo info) { surrogate_ = std::move(info); }

    /// The fitted vocabulary travels with the model so new corpora can be
    /// embedded consistently. Its fingerprint must match.
    const std::optional<Vocabulary>& vocabulary() const noexcept { return vocabulary_; }
    void attach_vocabulary(Vocabulary vocab);

private:
    TrainedModel() = default;
    void finalize();

    ModelKind kind_ = ModelKind::linear_svm;
    std::size_t dimension_ = 0;
    std::vector<double> weights_;
    std::vector<double> support_;  // row-major, support_size x dimension
    std::vector<double> support_sq_norm_;
    std::vector<double> coef_;
    double bias_ = 0.0;
    Hyperparameters hyper_;
    Calibration calibration_;
    std::uint64_t vocabulary_fp_ = 0;
    std::uint64_t fingerprint_ = 0;
    std::optional<SurrogateInfo> surrogate_;
    std::optional<Vocabulary> vocabulary_;
};

struct TrainConfig {
    ModelKind kind = ModelKind::linear_svm;
    double gamma = 1.0;
    std::vector<double> c_grid;          // empty: kind-specific default grid
    double validation_fraction = 0.2;    // split used to pick c
    std::size_t epochs = 40;             // linear SGD passes
    std::size_t max_passes = 400;        // RBF coordinate-ascent passes
    double tolerance = 1e-3;             // RBF projected-gradient stopping rule
    std::uint64_t seed = 0;
};

/// Trains a model on labeled vectors that share one vocabulary.
/// Throws on a single-class dataset or a dimension mismatch.
TrainedModel train(std::span<const LabeledVector> dataset, const TrainConfig& config);

struct SurrogateConfig {
    TrainConfig train;
    double holdout_fraction = 0.25;
};

/// Distills `teacher` into a new model trained on the teacher's predicted
/// labels. Agreement on a held-out split is stored in the model metadata.
TrainedModel train_surrogate(const Scorer& teacher, std::span<const FeatureVector> dataset,
                             const SurrogateConfig& config);

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const TrainedModel& model);
TrainedModel parse_model(std::string_view text);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace mptx
