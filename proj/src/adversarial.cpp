#include "mptx/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mptx/error.hpp"
#include "mptx/hash.hpp"
#include "mptx/parallel.hpp"
#include "mptx/random.hpp"

namespace mptx {

using nlohmann::json;

std::string_view to_string(PoolSource source) noexcept {
    switch (source) {
        case PoolSource::benign: return "benign";
        case PoolSource::malware: return "malware";
        case PoolSource::any: return "any";
    }
    return "?";
}

PoolSource parse_pool_source(std::string_view text) {
    if (text == "benign") return PoolSource::benign;
    if (text == "malware") return PoolSource::malware;
    if (text == "any") return PoolSource::any;
    fail(ErrorCode::invalid_argument, "unknown pool source '" + std::string(text) + "' (benign|malware|any)");
}

std::string_view to_string(StopReason reason) noexcept {
    switch (reason) {
        case StopReason::fitness_reached: return "fitness_reached";
        case StopReason::idle: return "idle";
        case StopReason::max_loop: return "max_loop";
    }
    return "?";
}

std::vector<FeatureToken> build_candidate_pool(std::span<const Sample> training, const Sample& base,
                                               const PoolConfig& config) {
    const std::set<FeatureToken> exclude(base.tokens.begin(), base.tokens.end());
    std::set<FeatureToken> pool;
    for (const auto& s : training) {
        if (config.source == PoolSource::benign && s.label != Label::benign) continue;
        if (config.source == PoolSource::malware && s.label != Label::malware) continue;
        for (const auto& t : s.tokens) {
            if (t.category == config.category && !exclude.contains(t)) pool.insert(t);
        }
    }
    if (pool.empty()) {
        fail(ErrorCode::invalid_argument, "no candidate features for base '" + base.id + "' in category " +
                                              std::string(to_string(config.category)));
    }
    return {pool.begin(), pool.end()};
}

namespace {

std::string genome_key(const Genome& g) { return std::string(g.begin(), g.end()); }

std::size_t tournament_pick(const std::vector<double>& fitness, std::size_t size, Rng& rng) {
    std::size_t best = rng.index(fitness.size());
    for (std::size_t t = 1; t < size; ++t) {
        const std::size_t c = rng.index(fitness.size());
        if (fitness[c] > fitness[best]) best = c;
    }
    return best;
}

}  // namespace

GaRun evolve(std::size_t num_genes, const GenomeFitness& fitness, const GaConfig& config) {
    if (num_genes == 0) fail(ErrorCode::invalid_argument, "genetic search needs at least one gene");
    if (config.population < 2) fail(ErrorCode::invalid_argument, "population must be at least 2");
    if (config.tournament == 0) fail(ErrorCode::invalid_argument, "tournament size must be positive");
    if (config.elitism >= config.population) fail(ErrorCode::invalid_argument, "elitism must be below the population");
    if (config.max_loop == 0) fail(ErrorCode::invalid_argument, "max_loop must be positive");

    Rng rng(config.seed);
    std::vector<Genome> population(config.population, Genome(num_genes, 0));
    for (auto& g : population) {
        for (auto& gene : g) gene = rng.bernoulli(config.init_rate) ? 1 : 0;
    }

    GaRun run;
    std::unordered_map<std::string, double> cache;
    std::unordered_set<std::string> recorded;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t idle = 0;
    std::vector<double> scores(config.population);

    for (;;) {
        // Score genomes not seen before, concurrently, then read everything from the cache.
        std::vector<std::size_t> fresh;
        std::unordered_set<std::string> queued;
        for (std::size_t i = 0; i < population.size(); ++i) {
            auto key = genome_key(population[i]);
            if (!cache.contains(key) && queued.insert(std::move(key)).second) fresh.push_back(i);
        }
        std::vector<double> fresh_scores(fresh.size());
        parallel_for(fresh.size(), config.workers,
                     [&](std::size_t j) { fresh_scores[j] = fitness(population[fresh[j]]); });
        for (std::size_t j = 0; j < fresh.size(); ++j) cache.emplace(genome_key(population[fresh[j]]), fresh_scores[j]);

        ++run.generations;
        double generation_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < population.size(); ++i) {
            auto key = genome_key(population[i]);
            scores[i] = cache.at(key);
            generation_max = std::max(generation_max, scores[i]);
            const bool empty = std::none_of(population[i].begin(), population[i].end(), [](auto v) { return v != 0; });
            if (!empty && scores[i] > config.evade_threshold && recorded.insert(key).second) {
                run.evading.push_back(population[i]);
                run.evading_fitness.push_back(scores[i]);
                run.evading_generation.push_back(run.generations);
            }
        }
        if (generation_max > best + config.idle_epsilon || std::isinf(best)) {
            idle = 0;
        } else {
            ++idle;
        }
        best = std::max(best, generation_max);
        run.best_history.push_back(best);

        if (best > config.stop_fitness) {
            run.reason = StopReason::fitness_reached;
            break;
        }
        if (idle >= config.idle_limit) {
            run.reason = StopReason::idle;
            break;
        }
        if (run.generations >= config.max_loop) {
            run.reason = StopReason::max_loop;
            break;
        }

        std::vector<std::size_t> order(population.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

        std::vector<Genome> next;
        next.reserve(population.size());
        for (std::size_t e = 0; e < config.elitism; ++e) next.push_back(population[order[e]]);
        while (next.size() < population.size()) {
            Genome a = population[tournament_pick(scores, config.tournament, rng)];
            Genome b = population[tournament_pick(scores, config.tournament, rng)];
            if (num_genes > 1) {
                const std::size_t cut = 1 + rng.index(num_genes - 1);
                for (std::size_t g = cut; g < num_genes; ++g) std::swap(a[g], b[g]);
            }
            for (Genome* child : {&a, &b}) {
                if (next.size() == population.size()) break;
                for (auto& gene : *child) {
                    if (rng.bernoulli(config.mutation_rate)) gene ^= 1;
                }
                next.push_back(std::move(*child));
            }
        }
        population = std::move(next);
    }
    return run;
}

Sample adversarial_sample(const Sample& base, std::span<const FeatureToken> activated) {
    Sample out = base;
    out.tokens.insert(out.tokens.end(), activated.begin(), activated.end());
    return out;
}

AttackResult generate(const Sample& base, std::span<const Scorer* const> scorers, const Vocabulary& vocab,
                      std::span<const FeatureToken> pool, const GaConfig& config) {
    if (scorers.empty()) fail(ErrorCode::invalid_argument, "attack needs at least one scorer");
    if (pool.empty()) fail(ErrorCode::invalid_argument, "no candidate features for base '" + base.id + "'");
    const std::set<FeatureToken> base_tokens(base.tokens.begin(), base.tokens.end());
    for (const auto& t : pool) {
        if (base_tokens.contains(t)) {
            fail(ErrorCode::invalid_argument, "candidate '" + t.str() + "' is already in base '" + base.id + "'");
        }
    }

    const auto base_x = embed(base, vocab);
    for (const Scorer* s : scorers) {
        check_dimension(*s, base_x.size());
        if (s->score(base_x).predicted() != Label::malware) {
            fail(ErrorCode::invalid_argument, "base not detected: '" + base.id + "' is not predicted malware by " +
                                                  s->info().kind);
        }
    }

    auto activated_of = [&](const Genome& g) {
        std::vector<FeatureToken> out;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g[i]) out.push_back(pool[i]);
        }
        return out;
    };
    auto embed_genome = [&](const Genome& g) {
        const auto activated = activated_of(g);
        return embed(adversarial_sample(base, activated), vocab);
    };

    GaConfig ga = config;
    ga.seed = Fnv1a().u64(config.seed).text(base.id).digest();
    const GenomeFitness fitness = [&](const Genome& g) {
        return scorers.front()->score(embed_genome(g)).p_benign;
    };
    GaRun run = evolve(pool.size(), fitness, ga);

    AttackResult out;
    out.base_id = base.id;
    out.pool_size = pool.size();
    out.generations = run.generations;
    out.reason = run.reason;
    out.best_history = std::move(run.best_history);
    for (std::size_t c = 0; c < run.evading.size(); ++c) {
        const auto x = embed_genome(run.evading[c]);
        AdversarialCandidate cand;
        cand.base_id = base.id;
        cand.activated = activated_of(run.evading[c]);
        cand.generation = run.evading_generation[c];
        bool evades = true;
        for (const Scorer* s : scorers) {
            const double p = s->score(x).p_benign;
            cand.benign_scores.push_back(p);
            evades = evades && p > config.evade_threshold;
        }
        if (evades) out.candidates.push_back(std::move(cand));
    }
    return out;
}

std::string ScoreBin::label() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "(%.1f,%.1f]", lo, hi);
    return buf;
}

std::vector<ScoreBin> benign_score_bins() {
    std::vector<ScoreBin> bins;
    for (int i = 5; i < 10; ++i) bins.push_back({i / 10.0, (i + 1) / 10.0});
    return bins;
}

std::optional<std::size_t> score_bin_index(double score) {
    const auto bins = benign_score_bins();
    for (std::size_t b = 0; b < bins.size(); ++b) {
        if (score > bins[b].lo && score <= bins[b].hi) return b;
    }
    return std::nullopt;
}

StratifiedSet stratify_by_score(std::span<const AdversarialCandidate> candidates, std::size_t per_bin,
                                std::uint64_t seed) {
    const auto bins = benign_score_bins();
    std::vector<std::vector<std::size_t>> members(bins.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (auto b = score_bin_index(candidates[i].fitness())) members[*b].push_back(i);
    }
    Rng root(seed);
    StratifiedSet out;
    for (std::size_t b = 0; b < bins.size(); ++b) {
        auto& idx = members[b];
        Rng rng = root.split(b);
        if (idx.size() < per_bin) {
            out.warnings.push_back({bins[b].label(), idx.size(), per_bin});
        } else {
            rng.shuffle(std::span<std::size_t>(idx));
            idx.resize(per_bin);
            std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) out.selected.push_back(candidates[i]);
    }
    return out;
}

std::string serialize_candidate(const AdversarialCandidate& candidate) {
    json activated = json::array();
    for (const auto& t : candidate.activated) activated.push_back(t.str());
    return json{{"type", "candidate"},
                {"base_id", candidate.base_id},
                {"activated", std::move(activated)},
                {"benign_scores", candidate.benign_scores},
                {"generation", candidate.generation}}
        .dump();
}

std::vector<AdversarialCandidate> parse_candidates(std::string_view text) {
    std::vector<AdversarialCandidate> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "line " + std::to_string(line_number) + ": ";
        try {
            const json j = json::parse(line);
            if (j.value("type", "candidate") != "candidate") continue;
            AdversarialCandidate c;
            c.base_id = j.at("base_id").get<std::string>();
            for (const auto& t : j.at("activated")) c.activated.push_back(parse_token(t.get<std::string>()));
            c.benign_scores = j.at("benign_scores").get<std::vector<double>>();
            c.generation = j.value("generation", std::size_t{0});
            out.push_back(std::move(c));
        } catch (const json::exception& e) {
            fail(ErrorCode::parse, where + "malformed candidate record (" + e.what() + ")");
        } catch (const Error& e) {
            fail(e.code(), where + e.what());
        }
    }
    return out;
}

std::vector<AdversarialCandidate> load_candidates(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::not_found, "cannot open candidates '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_candidates(buffer.str());
}

}  // namespace mptx
