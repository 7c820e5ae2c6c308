#include "mptx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "mptx/error.hpp"
#include "mptx/hash.hpp"
#include "mptx/random.hpp"

namespace mptx {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "hardware", "permission", "component", "intent",
    "api_call", "real_permission", "call", "url",
};

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string_view to_string(Label label) noexcept {
    return label == Label::malware ? "malware" : "benign";
}

Label parse_label(std::string_view text) {
    if (text == "malware") {
        return Label::malware;
    }
    if (text == "benign") {
        return Label::benign;
    }
    fail(ErrorCode::parse, "unknown label '" + std::string(text) + "'");
}

std::string_view to_string(Category category) noexcept {
    return kCategoryNames[static_cast<std::size_t>(category) - 1];
}

std::optional<Category> parse_category(std::string_view text) noexcept {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (text == kCategoryNames[i]) {
            return static_cast<Category>(i + 1);
        }
    }
    if (text.size() == 2 && (text[0] == 'S' || text[0] == 's') && text[1] >= '1' && text[1] <= '8') {
        return static_cast<Category>(text[1] - '0');
    }
    static const std::map<std::string_view, Category> aliases = {
        {"feature", Category::hardware},
        {"activity", Category::component},
        {"service_receiver", Category::component},
        {"receiver", Category::component},
        {"provider", Category::component},
        {"service", Category::component},
    };
    if (auto it = aliases.find(text); it != aliases.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::string FeatureToken::str() const {
    std::string out(to_string(category));
    out += "::";
    out += name;
    return out;
}

FeatureToken parse_token(std::string_view text) {
    const auto sep = text.find("::");
    if (sep == std::string_view::npos) {
        fail(ErrorCode::parse, "token '" + std::string(text) + "' has no '::' category separator");
    }
    const auto category_text = trim(text.substr(0, sep));
    const auto name = trim(text.substr(sep + 2));
    const auto category = parse_category(category_text);
    if (!category) {
        fail(ErrorCode::parse, "unknown category '" + std::string(category_text) + "' in token '" +
                                   std::string(text) + "'");
    }
    if (name.empty()) {
        fail(ErrorCode::parse, "token '" + std::string(text) + "' has an empty name");
    }
    return FeatureToken{*category, std::string(name)};
}

std::size_t FeatureTokenHash::operator()(const FeatureToken& token) const noexcept {
    return static_cast<std::size_t>(
        Fnv1a().u64(static_cast<std::uint64_t>(token.category)).text(token.name).digest());
}

std::string_view to_string(Encoding encoding) noexcept {
    return encoding == Encoding::tfidf ? "tfidf" : "binary";
}

Encoding parse_encoding(std::string_view text) {
    if (text == "tfidf") {
        return Encoding::tfidf;
    }
    if (text == "binary") {
        return Encoding::binary;
    }
    fail(ErrorCode::invalid_argument, "unknown encoding '" + std::string(text) + "'");
}

Vocabulary::Vocabulary(std::vector<FeatureToken> tokens, std::vector<std::size_t> document_frequency,
                       std::size_t corpus_size, Encoding encoding)
    : tokens_(std::move(tokens)),
      df_(std::move(document_frequency)),
      corpus_size_(corpus_size),
      encoding_(encoding) {
    if (tokens_.size() != df_.size()) {
        fail(ErrorCode::invalid_argument, "vocabulary: token and frequency counts differ");
    }
    Fnv1a hash;
    hash.text(to_string(encoding_)).u64(corpus_size_).u64(tokens_.size());
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (i > 0 && !(tokens_[i - 1] < tokens_[i])) {
            fail(ErrorCode::invalid_argument,
                 "vocabulary tokens must be strictly increasing at '" + tokens_[i].str() + "'");
        }
        if (df_[i] < 1 || df_[i] > corpus_size_) {
            fail(ErrorCode::invalid_argument,
                 "vocabulary document frequency out of range for '" + tokens_[i].str() + "'");
        }
        index_.emplace(tokens_[i], i);
        hash.u64(static_cast<std::uint64_t>(tokens_[i].category)).text(tokens_[i].name).u64(df_[i]);
    }
    fingerprint_ = hash.digest();
}

std::optional<std::size_t> Vocabulary::index_of(const FeatureToken& token) const {
    if (auto it = index_.find(token); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

double Vocabulary::idf(std::size_t index) const {
    return std::log(static_cast<double>(corpus_size_) / static_cast<double>(df_.at(index)));
}

Vocabulary fit_vocabulary(std::span<const Sample> training, Encoding encoding) {
    if (training.empty()) {
        fail(ErrorCode::invalid_argument, "empty corpus");
    }
    std::map<FeatureToken, std::size_t> df;
    std::set<FeatureToken> seen;
    for (const auto& sample : training) {
        seen.clear();
        seen.insert(sample.tokens.begin(), sample.tokens.end());
        for (const auto& token : seen) {
            ++df[token];
        }
    }
    std::vector<FeatureToken> tokens;
    std::vector<std::size_t> counts;
    tokens.reserve(df.size());
    counts.reserve(df.size());
    for (auto& [token, count] : df) {
        tokens.push_back(token);
        counts.push_back(count);
    }
    return Vocabulary(std::move(tokens), std::move(counts), training.size(), encoding);
}

FeatureVector embed(std::span<const FeatureToken> tokens, const Vocabulary& vocab) {
    if (tokens.empty()) {
        fail(ErrorCode::invalid_argument, "empty sample");
    }
    FeatureVector out;
    out.vocabulary = vocab.fingerprint();
    out.values.assign(vocab.size(), 0.0);

    std::vector<std::size_t> counts(vocab.size(), 0);
    for (const auto& token : tokens) {
        if (auto idx = vocab.index_of(token)) {
            ++counts[*idx];
        }
    }
    const double length = static_cast<double>(tokens.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) {
            continue;
        }
        if (vocab.encoding() == Encoding::binary) {
            out.values[i] = 1.0;
        } else {
            out.values[i] = (static_cast<double>(counts[i]) / length) * vocab.idf(i);
        }
    }
    return out;
}

FeatureVector embed(const Sample& sample, const Vocabulary& vocab) {
    if (sample.tokens.empty()) {
        fail(ErrorCode::invalid_argument, "empty sample '" + sample.id + "'");
    }
    return embed(std::span<const FeatureToken>(sample.tokens), vocab);
}

std::vector<LabeledVector> embed_all(std::span<const Sample> samples, const Vocabulary& vocab) {
    std::vector<LabeledVector> out;
    out.reserve(samples.size());
    for (const auto& sample : samples) {
        out.push_back(LabeledVector{embed(sample, vocab), sample.label, sample.id});
    }
    return out;
}

HoldoutSplit stratified_holdout(std::span<const Sample> samples, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        fail(ErrorCode::invalid_argument, "holdout fraction must be in [0, 1)");
    }
    HoldoutSplit out;
    Rng rng(seed);
    for (Label label : {Label::malware, Label::benign}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].label == label) idx.push_back(i);
        }
        rng.shuffle(std::span<std::size_t>(idx));
        const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

CorpusStats corpus_stats(std::span<const Sample> samples) {
    CorpusStats stats;
    std::unordered_set<FeatureToken, FeatureTokenHash> distinct;
    std::set<std::string> families;
    for (const auto& sample : samples) {
        ++stats.samples;
        ++(sample.label == Label::malware ? stats.malware : stats.benign);
        stats.tokens += sample.tokens.size();
        for (const auto& token : sample.tokens) {
            if (distinct.insert(token).second) {
                ++stats.per_category[static_cast<std::size_t>(token.category) - 1];
            }
        }
        if (sample.family) {
            families.insert(*sample.family);
        }
    }
    stats.distinct_tokens = distinct.size();
    stats.families = families.size();
    return stats;
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::parse: return "parse";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::io: return "io";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::version_mismatch: return "version_mismatch";
    }
    return "unknown";
}

std::string to_hex(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::uint64_t parse_hex(std::string_view text) {
    if (text.empty() || text.size() > 16) {
        fail(ErrorCode::parse, "bad hex fingerprint '" + std::string(text) + "'");
    }
    std::uint64_t value = 0;
    for (char c : text) {
        value <<= 4;
        if (c >= '0' && c <= '9') {
            value |= static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            value |= static_cast<std::uint64_t>(c - 'a' + 10);
        } else {
            fail(ErrorCode::parse, "bad hex fingerprint '" + std::string(text) + "'");
        }
    }
    return value;
}

}  // namespace mptx
