#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mptx/corpus.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

enum class ExplainMethod { mpt, lime, kshap };

std::string_view to_string(ExplainMethod method) noexcept;
ExplainMethod parse_explain_method(std::string_view text);

/// Attribution over the full input index space; coordinates that are zero in
/// the explained vector always receive 0.
struct BaselineAttribution {
    std::vector<double> values;
    double intercept = 0.0;  // LIME: fitted intercept; kernel SHAP: f(0)
    Label target = Label::malware;
    std::size_t evaluations = 0;
};

struct LimeConfig {
    std::size_t num_samples = 1000;
    std::optional<double> kernel_width;  // default 0.75 * sqrt(M), M = present features
    double ridge = 1.0;
    std::optional<Label> target;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

/// Weighted ridge regression of the target-class probability on binary masks
/// over the present features of x (mask 0 zeroes the coordinate). Sample
/// weights are exp(-d^2 / width^2) with d the number of masked features.
BaselineAttribution explain_lime(const FeatureVector& x, const Scorer& scorer, const LimeConfig& config = {});

enum class ShapMode { automatic, exact, sampled };

struct KernelShapConfig {
    std::size_t num_coalitions = 2048;
    std::size_t exact_limit = 12;  // automatic mode enumerates up to this many present features
    ShapMode mode = ShapMode::automatic;
    std::optional<Label> target;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

/// Shapley-kernel weighted least squares with background 0 and the
/// efficiency constraint sum(values) = f(x) - f(0) eliminated exactly.
BaselineAttribution explain_kernel_shap(const FeatureVector& x, const Scorer& scorer,
                                        const KernelShapConfig& config = {});

}  // namespace mptx
