#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "helpers.hpp"
#include "mptx/error.hpp"
#include "mptx/evaluation.hpp"
#include "mptx/models.hpp"

using namespace mptx;

namespace {

struct Split {
    std::vector<LabeledVector> train, test;
    Vocabulary vocab;
};

Split synthetic_split(std::uint64_t seed, std::size_t per_class, Encoding encoding = Encoding::tfidf) {
    SyntheticConfig c;
    c.malware = c.benign = per_class;
    c.vocab_size = 200;
    c.seed = seed;
    const auto docs = generate_synthetic(c);
    const auto holdout = stratified_holdout(docs, 0.25, seed);
    std::vector<Sample> train_docs;
    for (auto i : holdout.train) train_docs.push_back(docs[i]);
    Split s;
    s.vocab = fit_vocabulary(train_docs, encoding);
    for (auto i : holdout.train) s.train.push_back({embed(docs[i], s.vocab), docs[i].label, docs[i].id});
    for (auto i : holdout.test) s.test.push_back({embed(docs[i], s.vocab), docs[i].label, docs[i].id});
    return s;
}

LabeledVector point(double a, double b, Label l) { return {testing::vec({a, b}), l, ""}; }

}  // namespace

TEST_CASE("linearly separable toy set is fit exactly") {
    const std::vector<LabeledVector> data{point(1, 1, Label::malware), point(2, 1.5, Label::malware),
                                          point(-1, -1, Label::benign), point(-2, -0.5, Label::benign)};
    for (auto kind : {ModelKind::linear_svm, ModelKind::rbf_svm}) {
        TrainConfig config;
        config.kind = kind;
        const auto model = train(data, config);
        const auto report = classify_metrics(model, data);
        CHECK(report.accuracy == 1.0);
    }
}

TEST_CASE("training rejects a single class and ragged dimensions") {
    const std::vector<LabeledVector> one{point(1, 1, Label::malware), point(2, 1, Label::malware)};
    CHECK_THROWS_AS(train(one, {}), Error);
    std::vector<LabeledVector> ragged{point(1, 1, Label::malware), point(-1, -1, Label::benign)};
    ragged[1].x.values.push_back(0.0);
    CHECK_THROWS_AS(train(ragged, {}), Error);
}

TEST_CASE("linear model on the synthetic corpus reaches held-out MCC above 0.9") {
    const auto s = synthetic_split(1, 300);
    const auto model = train(s.train, {});
    const auto report = classify_metrics(model, s.test);
    REQUIRE(report.mcc.has_value());
    CHECK(*report.mcc > 0.9);
}

TEST_CASE("scores are deterministic, normalised and reject wrong dimensions") {
    const auto s = synthetic_split(2, 100);
    const auto model = train(s.train, {});
    Rng rng(5);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> x(model.dimension());
        for (auto& v : x) v = rng.bernoulli(0.1) ? rng.uniform() : 0.0;
        const auto a = model.score(x);
        const auto b = model.score(x);
        CHECK(a.p_malware == b.p_malware);
        CHECK(a.p_malware + a.p_benign == doctest::Approx(1.0).epsilon(1e-15));
    }
    std::vector<double> bad(model.dimension() + 1, 0.0);
    CHECK_THROWS_AS(model.score(bad), Error);
}

TEST_CASE("raising a positive-weight feature never lowers the malware score") {
    const auto s = synthetic_split(3, 100);
    const auto model = train(s.train, {});
    const auto& w = model.weights();
    for (const auto& d : s.test) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            auto x = d.x.values;
            const double before = model.score(x).p_malware;
            x[i] += 0.5;
            CHECK(model.score(x).p_malware >= before);
        }
    }
}

TEST_CASE("calibration preserves the decision ordering") {
    const auto s = synthetic_split(4, 100);
    for (auto kind : {ModelKind::linear_svm, ModelKind::rbf_svm}) {
        TrainConfig config;
        config.kind = kind;
        const auto model = train(s.train, config);
        CHECK(model.calibration().slope > 0.0);
        std::vector<std::pair<double, double>> pairs;
        for (const auto& d : s.test) pairs.emplace_back(model.decision(d.x.values), model.score(d.x).p_malware);
        std::sort(pairs.begin(), pairs.end());
        for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i].second >= pairs[i - 1].second);
    }
}

TEST_CASE("fit_calibration separates well-ordered decisions") {
    const std::vector<double> d{-3, -2, -1, 1, 2, 3};
    const std::vector<Label> l{Label::benign, Label::benign, Label::benign,
                               Label::malware, Label::malware, Label::malware};
    const auto c = fit_calibration(d, l);
    CHECK(c.slope > 0.0);
    CHECK(c.p_malware(3) > 0.5);
    CHECK(c.p_malware(-3) < 0.5);
}

TEST_CASE("self-distillation agrees with the teacher") {
    const auto s = synthetic_split(5, 200);
    const auto teacher = train(s.train, {});
    std::vector<FeatureVector> xs;
    for (const auto& d : s.train) xs.push_back(d.x);
    for (const auto& d : s.test) xs.push_back(d.x);
    const auto surrogate = train_surrogate(teacher, xs, {});
    REQUIRE(surrogate.surrogate().has_value());
    CHECK(surrogate.surrogate()->agreement >= 0.99);
    CHECK(surrogate.surrogate()->teacher_fingerprint == teacher.fingerprint());
    CHECK(surrogate.surrogate()->holdout > 0);
}

TEST_CASE("linear surrogate tracks an RBF teacher") {
    const auto s = synthetic_split(6, 300);
    TrainConfig tc;
    tc.kind = ModelKind::rbf_svm;
    const auto teacher = train(s.train, tc);
    std::vector<FeatureVector> xs;
    for (const auto& d : s.train) xs.push_back(d.x);
    for (const auto& d : s.test) xs.push_back(d.x);
    const auto surrogate = train_surrogate(teacher, xs, {});
    CHECK(surrogate.surrogate()->agreement >= 0.95);
}

TEST_CASE("a single-class teacher is degenerate") {
    FunctionScorer constant(3, [](std::span<const double>) { return 0.9; });
    const std::vector<FeatureVector> xs{testing::vec({1, 0, 0}), testing::vec({0, 1, 0})};
    CHECK_THROWS_WITH_AS(train_surrogate(constant, xs, {}), doctest::Contains("degenerate teacher"), Error);
}

TEST_CASE("model files round-trip and reject corruption") {
    testing::TempDir dir("model_io");
    const auto s = synthetic_split(7, 100);
    for (auto kind : {ModelKind::linear_svm, ModelKind::rbf_svm}) {
        TrainConfig config;
        config.kind = kind;
        auto model = train(s.train, config);
        model.attach_vocabulary(s.vocab);
        const auto path = dir / "m.json";
        save_model(model, path);
        const auto back = load_model(path);
        CHECK(back.fingerprint() == model.fingerprint());
        REQUIRE(back.vocabulary().has_value());
        CHECK(*back.vocabulary() == s.vocab);
        Rng rng(1);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> x(model.dimension());
            for (auto& v : x) v = rng.bernoulli(0.1) ? rng.uniform() : 0.0;
            CHECK(back.score(x).p_malware == model.score(x).p_malware);
        }

        const auto text = serialize_model(model);
        CHECK_THROWS_AS(parse_model(text.substr(0, text.size() / 2)), Error);
        auto j = nlohmann::json::parse(text);
        j["version"] = kModelFormatVersion + 1;
        try {
            parse_model(j.dump());
            FAIL("expected a version mismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::version_mismatch);
            CHECK(std::string(e.what()).find(std::to_string(kModelFormatVersion + 1)) != std::string::npos);
            CHECK(std::string(e.what()).find(std::to_string(kModelFormatVersion)) != std::string::npos);
        }
    }
}

TEST_CASE("model fingerprint changes with the parameters") {
    const auto s = synthetic_split(8, 100);
    TrainConfig a;
    a.c_grid = {1.0};
    a.seed = 1;
    TrainConfig b = a;
    b.seed = 2;
    const auto m1 = train(s.train, a);
    const auto m1_again = train(s.train, a);
    const auto m2 = train(s.train, b);
    CHECK(m1.fingerprint() == m1_again.fingerprint());
    CHECK(m1.weights() != m2.weights());
    CHECK(m1.fingerprint() != m2.fingerprint());
    auto recal = m1;
    recal.set_calibration({m1.calibration().slope * 2.0, m1.calibration().offset});
    CHECK(recal.fingerprint() != m1.fingerprint());
}
