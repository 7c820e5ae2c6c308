#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "mptx/corpus.hpp"
#include "mptx/error.hpp"

using namespace mptx;
using testing::sample;

namespace {

std::size_t index_of(const Vocabulary& v, const char* token) { return v.index_of(parse_token(token)).value(); }

mptx::SyntheticConfig small_config(std::uint64_t seed) {
    SyntheticConfig c;
    c.malware = 50;
    c.benign = 50;
    c.vocab_size = 80;
    c.signal = 5;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("tokens split at the first separator and accept category aliases") {
    const auto t = parse_token(" permission :: android.permission.SEND_SMS ");
    CHECK(t.category == Category::permission);
    CHECK(t.name == "android.permission.SEND_SMS");
    CHECK(parse_token("url::http://x::y").name == "http://x::y");
    CHECK(parse_category("S5") == Category::api_call);
    CHECK(parse_category("activity") == Category::component);
    CHECK(parse_category("feature") == Category::hardware);
    CHECK_FALSE(parse_category("bogus").has_value());
    CHECK_THROWS_AS(parse_token("bogus::x"), Error);
    CHECK_THROWS_AS(parse_token("no-separator"), Error);
}

TEST_CASE("vocabulary counts document frequency once per sample") {
    const std::vector<Sample> docs{sample("s1", Label::malware, {"permission::a", "permission::b"}),
                                   sample("s2", Label::benign, {"permission::b", "permission::b"})};
    const auto v = fit_vocabulary(docs);
    REQUIRE(v.size() == 2);
    CHECK(v.corpus_size() == 2);
    CHECK(v.document_frequency()[index_of(v, "permission::a")] == 1);
    CHECK(v.document_frequency()[index_of(v, "permission::b")] == 2);
}

TEST_CASE("single-document vocabulary has zero idf") {
    const std::vector<Sample> docs{sample("s1", Label::malware, {"permission::a"})};
    const auto v = fit_vocabulary(docs);
    CHECK(v.corpus_size() == 1);
    CHECK(v.idf(0) == 0.0);
}

TEST_CASE("empty training set is rejected") {
    CHECK_THROWS_WITH_AS(fit_vocabulary(std::span<const Sample>{}), "empty corpus", Error);
}

TEST_CASE("document frequencies match a naive scan over a synthetic corpus") {
    const auto docs = generate_synthetic(small_config(3));
    const auto v = fit_vocabulary(docs);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t df = 0;
        for (const auto& s : docs) {
            bool found = false;
            for (const auto& t : s.tokens) found = found || t == v.token(i);
            df += found ? 1 : 0;
        }
        CHECK(v.document_frequency()[i] == df);
    }
}

TEST_CASE("tf-idf uses raw counts over total tokens") {
    // |D| = 4, df(a) = 1, df(b) = 4
    const std::vector<Sample> docs{
        sample("d1", Label::malware, {"permission::a", "permission::b"}),
        sample("d2", Label::benign, {"permission::b"}),
        sample("d3", Label::benign, {"permission::b"}),
        sample("d4", Label::benign, {"permission::b"}),
    };
    const auto v = fit_vocabulary(docs);
    const auto x = embed(sample("q", Label::malware, {"permission::a", "permission::a", "permission::b"}), v);
    CHECK(x[index_of(v, "permission::a")] == doctest::Approx(2.0 / 3.0 * std::log(4.0)).epsilon(1e-12));
    CHECK(x[index_of(v, "permission::b")] == 0.0);
    CHECK(x.vocabulary == v.fingerprint());
}

TEST_CASE("out-of-vocabulary tokens count towards length but get no coordinate") {
    const std::vector<Sample> docs{sample("d1", Label::malware, {"permission::a"}),
                                   sample("d2", Label::benign, {"permission::b"})};
    const auto v = fit_vocabulary(docs);
    const auto x = embed(sample("q", Label::malware, {"permission::a", "url::unseen"}), v);
    CHECK(x.size() == 2);
    CHECK(x[index_of(v, "permission::a")] == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("an embedded sample is non-zero exactly at its listed features") {
    const std::vector<Sample> docs{
        sample("plankton", Label::malware,
               {"hardware::android.hardware.wifi", "permission::android.permission.INTERNET",
                "api_call::getDeviceId", "url::www.searchwebmobile.com"}),
        sample("b1", Label::benign, {"permission::android.permission.INTERNET", "activity::.MainActivity"}),
        sample("b2", Label::benign, {"activity::.MainActivity"}),
    };
    const auto v = fit_vocabulary(docs);
    const auto x = embed(docs[0], v);
    CHECK(x[index_of(v, "hardware::android.hardware.wifi")] > 0.0);
    CHECK(x[index_of(v, "api_call::getDeviceId")] > 0.0);
    CHECK(x[index_of(v, "url::www.searchwebmobile.com")] > 0.0);
    CHECK(x[index_of(v, "permission::android.permission.INTERNET")] > 0.0);
    CHECK(x[index_of(v, "component::.MainActivity")] == 0.0);
}

TEST_CASE("a sample with no tokens is rejected") {
    const std::vector<Sample> docs{sample("d1", Label::malware, {"permission::a"})};
    const auto v = fit_vocabulary(docs);
    Sample empty;
    empty.id = "e";
    CHECK_THROWS_AS(embed(empty, v), Error);
}

TEST_CASE("binary encoding marks presence") {
    const std::vector<Sample> docs{sample("d1", Label::malware, {"permission::a", "permission::b"}),
                                   sample("d2", Label::benign, {"permission::b"})};
    const auto v = fit_vocabulary(docs, Encoding::binary);
    const auto x = embed(sample("q", Label::malware, {"permission::b", "permission::b"}), v);
    CHECK(x[index_of(v, "permission::a")] == 0.0);
    CHECK(x[index_of(v, "permission::b")] == 1.0);
}

TEST_CASE("embedding is finite, non-negative and supported on the sample's tokens") {
    const auto docs = generate_synthetic(small_config(11));
    const auto v = fit_vocabulary(docs);
    for (const auto& s : docs) {
        const auto x = embed(s, v);
        std::set<std::size_t> support;
        for (const auto& t : s.tokens) support.insert(*v.index_of(t));
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::isfinite(x[i]));
            CHECK(x[i] >= 0.0);
            if (!support.count(i)) CHECK(x[i] == 0.0);
        }
    }
}

TEST_CASE("embedding one sample does not depend on the others") {
    auto docs = generate_synthetic(small_config(12));
    const auto v = fit_vocabulary(docs);
    const auto before = embed(docs[1], v);
    docs[0].tokens.push_back(docs[0].tokens.front());
    (void)embed(docs[0], v);
    CHECK(embed(docs[1], v) == before);
}

TEST_CASE("vocabulary is invariant to the order of training samples") {
    auto docs = generate_synthetic(small_config(13));
    const auto v1 = fit_vocabulary(docs);
    Rng rng(99);
    rng.shuffle(std::span<Sample>(docs));
    const auto v2 = fit_vocabulary(docs);
    CHECK(v1 == v2);
    CHECK(v1.fingerprint() == v2.fingerprint());
}

TEST_CASE("idf strictly decreases with document frequency") {
    const auto v = fit_vocabulary(generate_synthetic(small_config(14)));
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v.document_frequency()[i] < v.document_frequency()[j]) CHECK(v.idf(i) > v.idf(j));
        }
    }
}

TEST_CASE("token present in every document gets zero weight") {
    const std::vector<Sample> docs{sample("d1", Label::malware, {"permission::a", "permission::c"}),
                                   sample("d2", Label::benign, {"permission::a", "permission::b"})};
    const auto v = fit_vocabulary(docs);
    const auto x = embed(sample("q", Label::malware, {"permission::a", "permission::a", "permission::a"}), v);
    CHECK(x[index_of(v, "permission::a")] == 0.0);
}

TEST_CASE("synthetic corpus is deterministic for a seed") {
    const auto a = serialize_corpus(generate_synthetic(small_config(7)));
    const auto b = serialize_corpus(generate_synthetic(small_config(7)));
    const auto c = serialize_corpus(generate_synthetic(small_config(8)));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("noise-free synthetic malware carries every malware signal token") {
    auto config = small_config(5);
    config.noise = 0.0;
    const auto planted = planted_signals(config);
    const auto docs = generate_synthetic(config);
    std::size_t malware = 0;
    for (const auto& s : docs) {
        const auto& own = s.label == Label::malware ? planted.malware : planted.benign;
        const auto& other = s.label == Label::malware ? planted.benign : planted.malware;
        for (const auto& t : own) CHECK(std::find(s.tokens.begin(), s.tokens.end(), t) != s.tokens.end());
        for (const auto& t : other) CHECK(std::find(s.tokens.begin(), s.tokens.end(), t) == s.tokens.end());
        malware += s.label == Label::malware ? 1 : 0;
    }
    CHECK(malware == config.malware);
}

TEST_CASE("synthetic generation rejects empty requests") {
    auto c = small_config(1);
    c.malware = c.benign = 0;
    CHECK_THROWS_AS(generate_synthetic(c), Error);
    c = small_config(1);
    c.vocab_size = 0;
    CHECK_THROWS_AS(generate_synthetic(c), Error);
}

TEST_CASE("a JSONL line parses into a sample") {
    const auto s = parse_corpus(R"({"id":"x1","label":"malware","features":["permission::SEND_SMS"]})");
    REQUIRE(s.size() == 1);
    CHECK(s[0].id == "x1");
    CHECK(s[0].label == Label::malware);
    REQUIRE(s[0].tokens.size() == 1);
    CHECK(s[0].tokens[0] == FeatureToken{Category::permission, "SEND_SMS"});
    CHECK_FALSE(s[0].family.has_value());
}

TEST_CASE("corpus parse errors name the line or the token") {
    const std::string dup = R"({"id":"a","label":"benign","features":["url::x"]})"
                            "\n"
                            R"({"id":"a","label":"benign","features":["url::y"]})";
    CHECK_THROWS_WITH_AS(parse_corpus(dup), doctest::Contains("duplicate id"), Error);
    CHECK_THROWS_WITH_AS(parse_corpus("{\"id\":\"a\",\n"), doctest::Contains("line 1"), Error);
    CHECK_THROWS_WITH_AS(parse_corpus(R"({"id":"a","label":"benign","features":["nope::x"]})"),
                         doctest::Contains("nope::x"), Error);
    try {
        parse_corpus("\n{]");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("save then load round-trips a synthetic corpus") {
    testing::TempDir dir("corpus_roundtrip");
    auto config = small_config(21);
    config.malware = config.benign = 500;
    config.vocab_size = 300;
    const auto docs = generate_synthetic(config);
    save_corpus(docs, dir / "c.jsonl");
    const auto back = load_corpus(dir / "c.jsonl");
    REQUIRE(back.size() == 1000);
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(back[i] == docs[i]);
}

TEST_CASE("stratified holdout keeps class proportions and is seeded") {
    const auto docs = generate_synthetic(small_config(4));
    const auto split = stratified_holdout(docs, 0.2, 9);
    CHECK(split.test.size() == 20);
    CHECK(split.train.size() == 80);
    std::size_t mal = 0;
    for (auto i : split.test) mal += docs[i].label == Label::malware ? 1 : 0;
    CHECK(mal == 10);
    CHECK(stratified_holdout(docs, 0.2, 9).test == split.test);
    std::set<std::size_t> all(split.train.begin(), split.train.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == docs.size());
}

TEST_CASE("corpus statistics count labels and categories") {
    const std::vector<Sample> docs{sample("a", Label::malware, {"permission::p", "url::u", "url::u"}),
                                   sample("b", Label::benign, {"permission::p"})};
    const auto st = corpus_stats(docs);
    CHECK(st.samples == 2);
    CHECK(st.malware == 1);
    CHECK(st.benign == 1);
    CHECK(st.tokens == 4);
    CHECK(st.distinct_tokens == 2);
    CHECK(st.per_category[static_cast<std::size_t>(Category::url) - 1] == 1);
}
