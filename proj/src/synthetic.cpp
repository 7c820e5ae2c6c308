#include <algorithm>
#include <cstdio>
#include <numeric>

#include "mptx/corpus.hpp"
#include "mptx/error.hpp"
#include "mptx/hash.hpp"
#include "mptx/random.hpp"

namespace mptx {

namespace {

void validate(const SyntheticConfig& config) {
    if (config.malware + config.benign == 0) {
        fail(ErrorCode::invalid_argument, "synthetic corpus: zero samples requested");
    }
    if (config.vocab_size == 0) {
        fail(ErrorCode::invalid_argument, "synthetic corpus: zero vocabulary requested");
    }
    if (2 * config.signal >= config.vocab_size) {
        fail(ErrorCode::invalid_argument,
             "synthetic corpus: vocabulary must exceed the 2*signal planted tokens");
    }
    if (config.noise < 0.0 || config.noise > 1.0) {
        fail(ErrorCode::invalid_argument, "synthetic corpus: noise must lie in [0, 1]");
    }
    if (config.permission_share < 0.0 || config.permission_share > 1.0) {
        fail(ErrorCode::invalid_argument, "synthetic corpus: permission share must lie in [0, 1]");
    }
}

std::string token_name(Category category, std::size_t index) {
    char buf[64];
    if (category == Category::permission) {
        std::snprintf(buf, sizeof buf, "android.permission.SYN_%04zu", index);
    } else if (category == Category::url) {
        std::snprintf(buf, sizeof buf, "host%04zu.example.net", index);
    } else {
        std::snprintf(buf, sizeof buf, "%s.syn%04zu", std::string(to_string(category)).c_str(), index);
    }
    return buf;
}

// Each vocabulary slot gets a category: a permission block first, the rest
// dealt round-robin over the remaining seven sets.
std::vector<FeatureToken> synthetic_vocabulary(const SyntheticConfig& config) {
    const auto permissions = static_cast<std::size_t>(
        static_cast<double>(config.vocab_size) * config.permission_share + 0.5);
    std::vector<FeatureToken> tokens;
    tokens.reserve(config.vocab_size);
    std::size_t other = 0;
    for (std::size_t i = 0; i < config.vocab_size; ++i) {
        Category category = Category::permission;
        if (i >= permissions) {
            static constexpr Category rest[] = {Category::hardware, Category::component,
                                                Category::intent,   Category::api_call,
                                                Category::real_permission, Category::call,
                                                Category::url};
            category = rest[other++ % std::size(rest)];
        }
        tokens.push_back(FeatureToken{category, token_name(category, i)});
    }
    return tokens;
}

}  // namespace

PlantedSignals planted_signals(const SyntheticConfig& config) {
    validate(config);
    PlantedSignals planted;
    planted.all_tokens = synthetic_vocabulary(config);

    // Half of each class's signal comes from the permission set so that
    // permission-only evasion has something to work with.
    std::vector<std::size_t> perm;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < planted.all_tokens.size(); ++i) {
        (planted.all_tokens[i].category == Category::permission ? perm : rest).push_back(i);
    }
    Rng rng(Fnv1a().text("planted").u64(config.seed).digest());
    rng.shuffle(std::span(perm));
    rng.shuffle(std::span(rest));

    std::size_t pi = 0;
    std::size_t ri = 0;
    auto take = [&](bool prefer_permission) {
        if ((prefer_permission && pi < perm.size()) || ri >= rest.size()) {
            return perm.at(pi++);
        }
        return rest.at(ri++);
    };
    for (std::size_t s = 0; s < config.signal; ++s) {
        const bool want_perm = s % 2 == 0;
        planted.malware.push_back(planted.all_tokens[take(want_perm)]);
        planted.benign.push_back(planted.all_tokens[take(want_perm)]);
    }
    return planted;
}

std::vector<Sample> generate_synthetic(const SyntheticConfig& config) {
    const auto planted = planted_signals(config);

    std::vector<FeatureToken> background;
    for (const auto& token : planted.all_tokens) {
        const bool is_signal =
            std::find(planted.malware.begin(), planted.malware.end(), token) != planted.malware.end() ||
            std::find(planted.benign.begin(), planted.benign.end(), token) != planted.benign.end();
        if (!is_signal) {
            background.push_back(token);
        }
    }

    Rng rng(config.seed);
    // Background popularity in [0.2, 1.0] gives a spread of document frequencies.
    std::vector<double> popularity(background.size());
    for (auto& p : popularity) {
        p = 0.2 + 0.8 * rng.uniform();
    }

    std::vector<Label> labels(config.malware, Label::malware);
    labels.insert(labels.end(), config.benign, Label::benign);
    rng.shuffle(std::span(labels));

    std::vector<Sample> samples;
    samples.reserve(labels.size());
    std::size_t malware_index = 0;
    std::size_t benign_index = 0;
    std::vector<char> used(background.size());

    for (const Label label : labels) {
        Sample sample;
        sample.label = label;
        char id[32];
        if (label == Label::malware) {
            std::snprintf(id, sizeof id, "mal-%05zu", malware_index++);
        } else {
            std::snprintf(id, sizeof id, "ben-%05zu", benign_index++);
        }
        sample.id = id;

        const auto& own = label == Label::malware ? planted.malware : planted.benign;
        const auto& other = label == Label::malware ? planted.benign : planted.malware;
        std::uint64_t family_mask = 0;
        for (std::size_t s = 0; s < own.size(); ++s) {
            if (!rng.bernoulli(config.noise)) {
                sample.tokens.push_back(own[s]);
                family_mask |= std::uint64_t{1} << (s % 64);
            }
        }
        for (const auto& token : other) {
            if (rng.bernoulli(config.noise)) {
                sample.tokens.push_back(token);
            }
        }

        std::size_t want = 0;
        if (config.background_tokens > 0) {
            const std::size_t lo = (config.background_tokens + 1) / 2;
            want = lo + rng.index(config.background_tokens + 1);
        }
        want = std::min(want, background.size());
        if (sample.tokens.empty() && want == 0 && !background.empty()) {
            want = 1;
        }
        std::fill(used.begin(), used.end(), 0);
        for (std::size_t got = 0; got < want;) {
            const std::size_t b = rng.index(background.size());
            if (used[b] || rng.uniform() >= popularity[b]) {
                continue;
            }
            used[b] = 1;
            sample.tokens.push_back(background[b]);
            ++got;
        }
        if (sample.tokens.empty()) {
            sample.tokens.push_back(own.empty() ? planted.all_tokens.front() : own.front());
        }
        rng.shuffle(std::span(sample.tokens));

        if (label == Label::malware) {
            sample.family = "fam-" + to_hex(family_mask).substr(8);
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

}  // namespace mptx
