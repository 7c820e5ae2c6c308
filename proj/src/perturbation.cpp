#include "mptx/perturbation.hpp"

#include <cstdio>
#include <fstream>

#include "mptx/error.hpp"
#include "mptx/parallel.hpp"

namespace mptx {

std::vector<double> alpha_schedule(std::size_t steps) {
    if (steps < 2) {
        fail(ErrorCode::invalid_argument,
             "perturbation needs at least 2 steps per feature, got " + std::to_string(steps));
    }
    std::vector<double> alphas(steps);
    const double last = static_cast<double>(steps - 1);
    for (std::size_t k = 0; k < steps; ++k) {
        alphas[k] = static_cast<double>(k) / last;
    }
    return alphas;
}

PerturbationSet::PerturbationSet(FeatureVector base, std::size_t steps)
    : base_(std::move(base)), alphas_(alpha_schedule(steps)) {}

FeatureVector PerturbationSet::point(std::size_t feature, std::size_t step) const {
    FeatureVector out = base_;
    out.values.at(feature) = value(feature, step);
    return out;
}

PerturbationSet perturb(const FeatureVector& base, std::size_t steps) {
    return PerturbationSet(base, steps);
}

ResponseMatrix respond(const PerturbationSet& set, const Scorer& scorer, const RespondOptions& options) {
    check_dimension(scorer, set.features());
    const Scorer& base_scorer = options.base_scorer ? *options.base_scorer : scorer;
    check_dimension(base_scorer, set.features());
    const auto base_scores = base_scorer.score(set.base());

    ResponseMatrix out;
    out.target = options.target.value_or(base_scores.predicted());
    out.base_score = base_scores.of(out.target);
    if (!(out.base_score >= kBaseScoreFloor)) {
        fail(ErrorCode::numerical, "degenerate base score " + std::to_string(out.base_score) +
                                       " for class " + std::string(to_string(out.target)));
    }

    const std::size_t m = set.features();
    const std::size_t steps = set.steps();
    out.scores.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(steps));

    parallel_for_chunks(set.size(), options.workers, options.batch_size,
                        [&](std::size_t begin, std::size_t end) {
                            std::vector<double> point = set.base().values;
                            for (std::size_t cell = begin; cell < end; ++cell) {
                                const std::size_t i = cell / steps;
                                const std::size_t k = cell % steps;
                                const double saved = point[i];
                                point[i] = set.value(i, k);
                                out.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                                    scorer.score(std::span<const double>(point)).of(out.target);
                                point[i] = saved;
                            }
                        });

    out.r = (out.scores.array() - out.base_score) / out.base_score;
    out.mu = out.r.rowwise().mean();
    return out;
}

void write_perturbation_csv(const PerturbationSet& set, const ResponseMatrix& responses,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorCode::io, "cannot write perturbation table '" + path.string() + "'");
    }
    out << "feature,step,alpha,score\n";
    char line[128];
    for (std::size_t i = 0; i < set.features(); ++i) {
        for (std::size_t k = 0; k < set.steps(); ++k) {
            std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g\n", i, k, set.alphas()[k],
                          responses.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
            out << line;
        }
    }
}

}  // namespace mptx
