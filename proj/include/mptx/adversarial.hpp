#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mptx/corpus.hpp"
#include "mptx/scorer.hpp"

namespace mptx {

/// Which training samples contribute candidate tokens.
enum class PoolSource {
    benign,   // configuration 1
    malware,  // configuration 2
    any,
};

std::string_view to_string(PoolSource source) noexcept;
PoolSource parse_pool_source(std::string_view text);

struct PoolConfig {
    Category category = Category::permission;
    PoolSource source = PoolSource::benign;
};

/// Distinct tokens of the configured category and source in `training`,
/// minus the tokens of `base`, in token order. Throws "no candidate features".
std::vector<FeatureToken> build_candidate_pool(std::span<const Sample> training, const Sample& base,
                                               const PoolConfig& config = {});

struct GaConfig {
    std::size_t population = 50;
    double mutation_rate = 0.02;
    std::size_t tournament = 3;
    std::size_t elitism = 1;
    double init_rate = 0.1;
    std::size_t max_loop = 500;
    std::size_t idle_limit = 10;
    double idle_epsilon = 1e-6;
    double stop_fitness = 0.99;
    double evade_threshold = 0.5;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
};

enum class StopReason { fitness_reached, idle, max_loop };
std::string_view to_string(StopReason reason) noexcept;

using Genome = std::vector<std::uint8_t>;
using GenomeFitness = std::function<double(const Genome&)>;

struct GaRun {
    /// Distinct non-empty genomes whose fitness exceeded evade_threshold, in
    /// the order first seen, with that fitness and generation (1-based).
    std::vector<Genome> evading;
    std::vector<double> evading_fitness;
    std::vector<std::size_t> evading_generation;
    std::vector<double> best_history;  // running maximum after each generation
    std::size_t generations = 0;
    StopReason reason = StopReason::max_loop;
};

/// Genetic search over binary genomes. Fitness must be pure; a generation is
/// evaluated concurrently and written by index.
GaRun evolve(std::size_t num_genes, const GenomeFitness& fitness, const GaConfig& config);

struct AdversarialCandidate {
    std::string base_id;
    std::vector<FeatureToken> activated;  // sorted, disjoint from the base tokens
    std::vector<double> benign_scores;    // one per scorer, in scorer order
    std::size_t generation = 0;

    /// Benign score under the first (fitness) scorer.
    double fitness() const { return benign_scores.empty() ? 0.0 : benign_scores.front(); }
};

struct AttackResult {
    std::string base_id;
    std::vector<AdversarialCandidate> candidates;
    std::size_t pool_size = 0;
    std::size_t generations = 0;
    StopReason reason = StopReason::max_loop;
    std::vector<double> best_history;
};

/// Base tokens followed by the activated tokens (one occurrence each).
Sample adversarial_sample(const Sample& base, std::span<const FeatureToken> activated);

/// Runs the GA with the benign score of scorers[0] as fitness. A candidate is
/// returned only if every scorer gives it a benign score above 0.5 when
/// re-scored at return time. Throws "base not detected" when any scorer does
/// not predict the base as malware.
AttackResult generate(const Sample& base, std::span<const Scorer* const> scorers, const Vocabulary& vocab,
                      std::span<const FeatureToken> pool, const GaConfig& config);

struct ScoreBin {
    double lo = 0.5;
    double hi = 0.6;
    std::string label() const;  // "(0.5,0.6]"
};

/// (0.5,0.6], ..., (0.9,1.0].
std::vector<ScoreBin> benign_score_bins();

/// Index into benign_score_bins() for a score, or nullopt when score <= 0.5 or > 1.
std::optional<std::size_t> score_bin_index(double score);

struct BinShortfall {
    std::string bin;
    std::size_t available = 0;
    std::size_t requested = 0;
};

struct StratifiedSet {
    std::vector<AdversarialCandidate> selected;  // grouped by bin, original order within a bin
    std::vector<BinShortfall> warnings;
};

StratifiedSet stratify_by_score(std::span<const AdversarialCandidate> candidates, std::size_t per_bin,
                                std::uint64_t seed);

/// JSONL: {"base_id", "activated": [...], "benign_scores": [...], "generation"}.
std::string serialize_candidate(const AdversarialCandidate& candidate);
std::vector<AdversarialCandidate> parse_candidates(std::string_view text);
std::vector<AdversarialCandidate> load_candidates(const std::filesystem::path& path);

}  // namespace mptx
