#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "mptx/corpus.hpp"

namespace mptx {

struct ClassScores {
    double p_malware = 0.5;
    double p_benign = 0.5;

    static ClassScores from_malware(double p) noexcept { return {p, 1.0 - p}; }

    double of(Label label) const noexcept {
        return label == Label::malware ? p_malware : p_benign;
    }
    /// Ties go to malware.
    Label predicted() const noexcept {
        return p_malware >= p_benign ? Label::malware : Label::benign;
    }
};

struct ScorerInfo {
    std::string kind;
    std::uint64_t fingerprint = 0;
};

/// Black-box classifier contract. Implementations must be pure: the same
/// input always yields the same scores, and concurrent calls are safe.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::size_t dimension() const = 0;
    virtual ClassScores score(std::span<const double> x) const = 0;
    virtual ScorerInfo info() const = 0;

    ClassScores score(const FeatureVector& x) const { return score(std::span<const double>(x.values)); }
};

/// Adapts any callable returning P(malware) to the Scorer contract.
class FunctionScorer final : public Scorer {
public:
    using Fn = std::function<double(std::span<const double>)>;

    FunctionScorer(std::size_t dimension, Fn p_malware, std::string kind = "function")
        : dimension_(dimension), fn_(std::move(p_malware)), kind_(std::move(kind)) {}

    std::size_t dimension() const override { return dimension_; }
    ClassScores score(std::span<const double> x) const override;
    ScorerInfo info() const override { return {kind_, 0}; }
    using Scorer::score;

private:
    std::size_t dimension_;
    Fn fn_;
    std::string kind_;
};

/// Throws Error(dimension_mismatch) when x does not match the scorer.
void check_dimension(const Scorer& scorer, std::size_t size);

}  // namespace mptx
