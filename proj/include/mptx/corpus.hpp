#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mptx {

enum class Label { malware, benign };

std::string_view to_string(Label label) noexcept;
Label parse_label(std::string_view text);
inline Label opposite(Label label) noexcept {
    return label == Label::malware ? Label::benign : Label::malware;
}

/// The eight static-analysis feature sets S1..S8 of DREBIN-style inputs.
enum class Category : std::uint8_t {
    hardware = 1,         // S1
    permission = 2,       // S2 requested permissions
    component = 3,        // S3 activities, services, receivers, providers
    intent = 4,           // S4 filtered intents
    api_call = 5,         // S5 restricted API calls
    real_permission = 6,  // S6 used permissions
    call = 7,             // S7 suspicious API calls
    url = 8,              // S8 network addresses
};

inline constexpr std::size_t kCategoryCount = 8;

/// Canonical category name as written in corpus files ("permission", ...).
std::string_view to_string(Category category) noexcept;

/// Accepts canonical names, "S1".."S8", and the raw DREBIN prefixes
/// ("feature", "activity", "service_receiver", "provider", "service").
std::optional<Category> parse_category(std::string_view text) noexcept;

struct FeatureToken {
    Category category = Category::permission;
    std::string name;

    auto operator<=>(const FeatureToken&) const = default;
    bool operator==(const FeatureToken&) const = default;

    /// "category::name"
    std::string str() const;
};

/// Splits "category::name" at the first "::" and trims both parts.
/// Throws Error(parse) naming the token when the category is unknown.
FeatureToken parse_token(std::string_view text);

struct FeatureTokenHash {
    std::size_t operator()(const FeatureToken& token) const noexcept;
};

struct Sample {
    std::string id;
    Label label = Label::malware;
    std::optional<std::string> family;
    std::vector<FeatureToken> tokens;  // multiset, input order preserved

    bool operator==(const Sample&) const = default;
};

/// How present tokens are turned into numbers.
enum class Encoding {
    tfidf,   // tf(t, X) * ln(|D| / df(t))
    binary,  // 1 if present
};

std::string_view to_string(Encoding encoding) noexcept;
Encoding parse_encoding(std::string_view text);

class Vocabulary {
public:
    Vocabulary() = default;

    /// Builds from already-sorted distinct tokens. Validates ordering and
    /// 1 <= df <= corpus_size.
    Vocabulary(std::vector<FeatureToken> tokens, std::vector<std::size_t> document_frequency,
               std::size_t corpus_size, Encoding encoding = Encoding::tfidf);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t corpus_size() const noexcept { return corpus_size_; }
    Encoding encoding() const noexcept { return encoding_; }
    const std::vector<FeatureToken>& tokens() const noexcept { return tokens_; }
    const std::vector<std::size_t>& document_frequency() const noexcept { return df_; }
    const FeatureToken& token(std::size_t index) const { return tokens_.at(index); }

    std::optional<std::size_t> index_of(const FeatureToken& token) const;

    /// ln(|D| / df). Zero when a token occurs in every training sample.
    double idf(std::size_t index) const;

    /// Stable 64-bit identity over tokens, frequencies, corpus size and encoding.
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && df_ == other.df_ &&
               corpus_size_ == other.corpus_size_ && encoding_ == other.encoding_;
    }

private:
    std::vector<FeatureToken> tokens_;
    std::vector<std::size_t> df_;
    std::size_t corpus_size_ = 0;
    Encoding encoding_ = Encoding::tfidf;
    std::unordered_map<FeatureToken, std::size_t, FeatureTokenHash> index_;
    std::uint64_t fingerprint_ = 0;
};

/// Dense embedding of one sample under a fitted vocabulary.
struct FeatureVector {
    std::vector<double> values;
    std::uint64_t vocabulary = 0;  // fingerprint of the fitted vocabulary

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    bool operator==(const FeatureVector&) const = default;
};

/// Throws Error(invalid_argument, "empty corpus") on empty input.
Vocabulary fit_vocabulary(std::span<const Sample> training, Encoding encoding = Encoding::tfidf);

/// Embeds a token multiset. Out-of-vocabulary tokens still count towards the
/// sample length |X| but receive no coordinate.
FeatureVector embed(std::span<const FeatureToken> tokens, const Vocabulary& vocab);
FeatureVector embed(const Sample& sample, const Vocabulary& vocab);

struct LabeledVector {
    FeatureVector x;
    Label label = Label::malware;
    std::string id;
};

std::vector<LabeledVector> embed_all(std::span<const Sample> samples, const Vocabulary& vocab);

struct SyntheticConfig {
    std::size_t malware = 500;
    std::size_t benign = 500;
    std::size_t vocab_size = 300;
    std::size_t signal = 10;            // planted signal tokens per class
    double noise = 0.1;                 // signal dropout / cross-class leak rate
    std::size_t background_tokens = 20; // mean number of non-signal tokens per sample
    double permission_share = 0.3;      // fraction of the vocabulary in the permission set
    std::uint64_t seed = 0;
};

/// Planted token ids of a synthetic configuration, in generation order.
struct PlantedSignals {
    std::vector<FeatureToken> malware;
    std::vector<FeatureToken> benign;
    std::vector<FeatureToken> all_tokens;  // full synthetic vocabulary
};

PlantedSignals planted_signals(const SyntheticConfig& config);

/// Deterministic desk-scale corpus with planted class-signal tokens.
std::vector<Sample> generate_synthetic(const SyntheticConfig& config);

/// JSONL corpus, one sample per line:
/// {"id":..., "label":"malware"|"benign", "family":..., "features":["cat::name", ...]}
std::vector<Sample> load_corpus(const std::filesystem::path& path);
std::vector<Sample> parse_corpus(std::string_view text);
void save_corpus(std::span<const Sample> samples, const std::filesystem::path& path);
std::string serialize_corpus(std::span<const Sample> samples);

struct HoldoutSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-label shuffle, then round(fraction * class size) of each label is held
/// out. Index lists are returned in ascending order.
HoldoutSplit stratified_holdout(std::span<const Sample> samples, double fraction, std::uint64_t seed);

struct CorpusStats {
    std::size_t samples = 0;
    std::size_t malware = 0;
    std::size_t benign = 0;
    std::size_t tokens = 0;
    std::size_t distinct_tokens = 0;
    std::size_t families = 0;
    std::array<std::size_t, kCategoryCount> per_category{};
};

CorpusStats corpus_stats(std::span<const Sample> samples);

}  // namespace mptx
