#include "mptx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mptx/error.hpp"
#include "mptx/parallel.hpp"

namespace mptx {

std::size_t positive_count(std::span<const double> values) {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; }));
}

bool good_explanation(std::span<const double> activated_attribution, double threshold) {
    if (activated_attribution.empty()) {
        fail(ErrorCode::invalid_argument, "adversarial candidate has no activated features");
    }
    return static_cast<double>(positive_count(activated_attribution)) /
               static_cast<double>(activated_attribution.size()) >
           threshold;
}

std::vector<double> activated_attribution(const AdversarialCandidate& candidate, const Vocabulary& vocab,
                                          std::span<const double> attribution) {
    if (attribution.size() != vocab.size()) {
        fail(ErrorCode::dimension_mismatch, "attribution has " + std::to_string(attribution.size()) +
                                                " entries but the vocabulary has " + std::to_string(vocab.size()));
    }
    std::vector<double> out;
    out.reserve(candidate.activated.size());
    for (const auto& t : candidate.activated) {
        const auto i = vocab.index_of(t);
        if (!i) fail(ErrorCode::not_found, "activated token '" + t.str() + "' is not in the vocabulary");
        out.push_back(attribution[*i]);
    }
    return out;
}

std::vector<double> default_thresholds() {
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) out.push_back(i / 10.0);
    return out;
}

GoodExplanationResult sweep_good_explanation(std::span<const ExplainedCandidate> candidates,
                                             std::span<const double> thresholds) {
    GoodExplanationResult out;
    if (thresholds.empty()) {
        out.thresholds = default_thresholds();
    } else {
        out.thresholds.assign(thresholds.begin(), thresholds.end());
    }
    std::vector<std::size_t> good(out.thresholds.size(), 0);
    for (const auto& c : candidates) {
        out.samples.push_back({c.activated_attribution.size(), positive_count(c.activated_attribution)});
        for (std::size_t t = 0; t < out.thresholds.size(); ++t) {
            good[t] += good_explanation(c.activated_attribution, out.thresholds[t]) ? 1 : 0;
        }
    }
    for (std::size_t t = 0; t < out.thresholds.size(); ++t) {
        out.fractions.push_back(candidates.empty() ? 0.0
                                                   : static_cast<double>(good[t]) /
                                                         static_cast<double>(candidates.size()));
    }
    return out;
}

std::string CountBin::label() const {
    if (!hi) return std::to_string(lo) + "+";
    return "(" + std::to_string(lo) + "," + std::to_string(*hi) + "]";
}

std::vector<CountBin> activated_count_bins() { return {{0, 30}, {30, 50}, {50, std::nullopt}}; }

FunctionalBins functional_analysis(std::span<const ExplainedCandidate> candidates, double good_threshold) {
    FunctionalBins out;
    out.score_bins = benign_score_bins();
    out.count_bins = activated_count_bins();
    out.cells.assign(out.score_bins.size(), std::vector<FunctionalCell>(out.count_bins.size()));
    for (const auto& c : candidates) {
        const bool good = good_explanation(c.activated_attribution, good_threshold);
        const auto s = score_bin_index(c.benign_score);
        if (!s) {
            ++out.outside;
            continue;
        }
        const std::size_t n = c.activated_attribution.size();
        for (std::size_t b = 0; b < out.count_bins.size(); ++b) {
            if (out.count_bins[b].contains(n)) {
                auto& cell = out.cells[*s][b];
                ++cell.population;
                cell.good += good ? 1 : 0;
                break;
            }
        }
    }
    return out;
}

Explainer make_explainer(const Scorer& scorer, const ExplainerOptions& options) {
    switch (options.method) {
        case ExplainMethod::mpt:
            return [&scorer, cfg = options.mpt](const FeatureVector& x, Label target) {
                ExplainConfig c = cfg;
                c.target = target;
                return explain(x, scorer, c).attribution.a;
            };
        case ExplainMethod::lime:
            return [&scorer, cfg = options.lime](const FeatureVector& x, Label target) {
                LimeConfig c = cfg;
                c.target = target;
                return explain_lime(x, scorer, c).values;
            };
        case ExplainMethod::kshap:
            return [&scorer, cfg = options.kshap](const FeatureVector& x, Label target) {
                KernelShapConfig c = cfg;
                c.target = target;
                return explain_kernel_shap(x, scorer, c).values;
            };
    }
    fail(ErrorCode::invalid_argument, "unknown explanation method");
}

std::vector<std::size_t> top_present_features(std::span<const double> attribution, const FeatureVector& x,
                                              std::size_t n) {
    if (attribution.size() != x.size()) {
        fail(ErrorCode::dimension_mismatch, "attribution and vector sizes differ");
    }
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.values[i] != 0.0) present.push_back(i);
    }
    std::stable_sort(present.begin(), present.end(),
                     [&](std::size_t a, std::size_t b) { return attribution[a] > attribution[b]; });
    if (present.size() > n) present.resize(n);
    return present;
}

std::string_view to_string(FidelityMode mode) noexcept {
    return mode == FidelityMode::deduction ? "deduction" : "augmentation";
}

FidelityMode parse_fidelity_mode(std::string_view text) {
    if (text == "deduction") return FidelityMode::deduction;
    if (text == "augmentation") return FidelityMode::augmentation;
    fail(ErrorCode::invalid_argument, "unknown fidelity mode '" + std::string(text) + "' (deduction|augmentation)");
}

namespace {

std::vector<std::size_t> axis(std::size_t max_features, std::size_t dimension) {
    std::vector<std::size_t> n(std::min(max_features, dimension) + 1);
    std::iota(n.begin(), n.end(), std::size_t{0});
    return n;
}

// hits[s][p]: whether sample s counts towards PCR at axis point p.
FidelityCurve finish(FidelityMode mode, std::vector<std::size_t> n, const std::vector<std::vector<char>>& hits,
                     std::size_t skipped) {
    FidelityCurve out;
    out.mode = mode;
    out.samples = hits.size();
    out.skipped = skipped;
    out.pcr.assign(n.size(), 0.0);
    for (std::size_t p = 0; p < n.size(); ++p) {
        std::size_t count = 0;
        for (const auto& h : hits) count += h[p] ? 1 : 0;
        out.pcr[p] = hits.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(hits.size());
    }
    out.n = std::move(n);
    return out;
}

}  // namespace

FidelityCurve deduction_test(std::span<const LabeledVector> dataset, const Scorer& scorer,
                             const Explainer& explainer, std::size_t max_features, std::size_t workers) {
    if (dataset.empty()) fail(ErrorCode::invalid_argument, "deduction test needs a non-empty dataset");
    const std::size_t dim = dataset.front().x.size();
    check_dimension(scorer, dim);

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (scorer.score(dataset[i].x).predicted() == dataset[i].label) kept.push_back(i);
    }
    auto n = axis(max_features, dim);
    std::vector<std::vector<char>> hits(kept.size(), std::vector<char>(n.size(), 0));
    parallel_for(kept.size(), workers, [&](std::size_t s) {
        const auto& sample = dataset[kept[s]];
        const auto attribution = explainer(sample.x, sample.label);
        const auto top = top_present_features(attribution, sample.x, n.back());
        for (std::size_t p = 0; p < n.size(); ++p) {
            std::vector<double> point = sample.x.values;
            for (std::size_t j = 0; j < std::min(n[p], top.size()); ++j) point[top[j]] = 0.0;
            hits[s][p] = scorer.score(std::span<const double>(point)).predicted() == sample.label;
        }
    });
    return finish(FidelityMode::deduction, std::move(n), hits, dataset.size() - kept.size());
}

FidelityCurve augmentation_test(std::span<const LabeledVector> malware, std::span<const LabeledVector> benign,
                                const Scorer& scorer, const Explainer& explainer, std::size_t max_features,
                                std::size_t workers) {
    if (malware.empty() || benign.empty()) {
        fail(ErrorCode::invalid_argument, "augmentation test needs non-empty malware and benign sets");
    }
    const std::size_t dim = malware.front().x.size();
    check_dimension(scorer, dim);
    for (const auto& b : benign) {
        if (b.x.size() != dim) fail(ErrorCode::dimension_mismatch, "benign vector '" + b.id + "' has the wrong size");
    }

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < malware.size(); ++i) {
        if (scorer.score(malware[i].x).predicted() == Label::malware) kept.push_back(i);
    }
    auto n = axis(max_features, dim);
    std::vector<std::vector<char>> hits(kept.size(), std::vector<char>(n.size(), 0));
    parallel_for(kept.size(), workers, [&](std::size_t s) {
        const auto& source = malware[kept[s]];
        const auto& target = benign[kept[s] % benign.size()];
        const auto attribution = explainer(source.x, Label::malware);
        const auto top = top_present_features(attribution, source.x, n.back());
        for (std::size_t p = 0; p < n.size(); ++p) {
            std::vector<double> point = target.x.values;
            for (std::size_t j = 0; j < std::min(n[p], top.size()); ++j) point[top[j]] = source.x.values[top[j]];
            hits[s][p] = scorer.score(std::span<const double>(point)).predicted() == Label::malware;
        }
    });
    return finish(FidelityMode::augmentation, std::move(n), hits, malware.size() - kept.size());
}

ClassificationReport classify_metrics(std::span<const Label> truth, std::span<const Label> predicted) {
    if (truth.size() != predicted.size()) {
        fail(ErrorCode::dimension_mismatch, "label and prediction counts differ");
    }
    ClassificationReport r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos = truth[i] == Label::malware;
        const bool hit = predicted[i] == Label::malware;
        if (pos && hit) ++r.tp;
        else if (pos) ++r.fn;
        else if (hit) ++r.fp;
        else ++r.tn;
    }
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    r.accuracy = truth.empty() ? 0.0 : d(r.tp + r.tn) / d(truth.size());
    if (r.tp + r.fn > 0) r.tpr = d(r.tp) / d(r.tp + r.fn);
    if (r.fp + r.tn > 0) r.fpr = d(r.fp) / d(r.fp + r.tn);
    if (r.tp + r.fn == 0 || r.fp + r.tn == 0) {
        r.mcc_note = "single-class corpus: MCC is undefined";
    } else {
        const double denom = std::sqrt(d(r.tp + r.fp) * d(r.tp + r.fn) * d(r.tn + r.fp) * d(r.tn + r.fn));
        r.mcc = denom == 0.0 ? 0.0 : (d(r.tp) * d(r.tn) - d(r.fp) * d(r.fn)) / denom;
    }
    return r;
}

ClassificationReport classify_metrics(const Scorer& scorer, std::span<const LabeledVector> dataset) {
    std::vector<Label> truth, predicted;
    for (const auto& s : dataset) {
        truth.push_back(s.label);
        predicted.push_back(scorer.score(s.x).predicted());
    }
    return classify_metrics(truth, predicted);
}

}  // namespace mptx
