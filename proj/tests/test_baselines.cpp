#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "mptx/baselines.hpp"
#include "mptx/error.hpp"
#include "oracles.hpp"

using namespace mptx;
using testing::vec;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Target-class probability of x with the present features outside `mask` zeroed.
double masked_value(const Scorer& f, const FeatureVector& x, const std::vector<std::size_t>& present,
                    std::uint32_t mask, Label target) {
    std::vector<double> p = x.values;
    for (std::size_t j = 0; j < present.size(); ++j) {
        if (!(mask & (1U << j))) p[present[j]] = 0.0;
    }
    return f.score(std::span<const double>(p)).of(target);
}

std::vector<std::size_t> present_of(const FeatureVector& x) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) out.push_back(i);
    }
    return out;
}

FeatureVector random_vector(Rng& rng, std::size_t m, double zero_rate) {
    std::vector<double> v(m);
    for (auto& e : v) e = rng.bernoulli(zero_rate) ? 0.0 : 0.2 + rng.uniform();
    v[0] = 0.5;
    return vec(v);
}

}  // namespace

TEST_CASE("exact kernel SHAP recovers additive contributions") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 2 + rng.index(11);
        std::vector<double> a(m), b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = 0.04 * (rng.uniform() - 0.5);
            b[i] = 0.03 * (rng.uniform() - 0.5);
        }
        auto g = [a, b](std::size_t i, double v) { return a[i] * v + b[i] * v * v; };
        FunctionScorer f(m, [g, m](std::span<const double> x) {
            double s = 0.5;
            for (std::size_t i = 0; i < m; ++i) s += g(i, x[i]);
            return s;
        });
        const auto x = random_vector(rng, m, 0.2);
        KernelShapConfig c;
        c.target = Label::malware;
        const auto phi = explain_kernel_shap(x, f, c);
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(std::abs(phi.values[i] - (g(i, x[i]) - g(i, 0.0))) <= 1e-6);
        }
    }
}

TEST_CASE("exact kernel SHAP matches subset-formula Shapley values on interacting scorers") {
    Rng rng(5);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t m = 3 + rng.index(8);
        std::vector<double> w(m);
        for (auto& e : w) e = 2.0 * rng.uniform() - 1.0;
        FunctionScorer f(m, [w](std::span<const double> x) {
            double z = -0.2;
            for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
            z += 1.5 * x[0] * x[1];
            return sigmoid(z);
        });
        const auto x = random_vector(rng, m, 0.25);
        const auto present = present_of(x);
        const Label target = f.score(x).predicted();
        const auto expected = oracle::shapley_bruteforce(static_cast<int>(present.size()), [&](std::uint32_t s) {
            return masked_value(f, x, present, s, target);
        });
        const auto phi = explain_kernel_shap(x, f);
        CHECK(phi.target == target);
        for (std::size_t j = 0; j < present.size(); ++j) CHECK(std::abs(phi.values[present[j]] - expected[j]) <= 1e-6);
        for (std::size_t i = 0; i < m; ++i) {
            if (x[i] == 0.0) CHECK(phi.values[i] == 0.0);
        }
    }
}

TEST_CASE("kernel SHAP efficiency holds in every mode") {
    Rng rng(8);
    for (auto mode : {ShapMode::exact, ShapMode::sampled}) {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t m = 2 + rng.index(14);
            FunctionScorer f(m, [](std::span<const double> x) {
                double z = 0.3;
                for (std::size_t i = 0; i < x.size(); ++i) z += (i % 3 == 0 ? -1.0 : 0.7) * x[i] * (1.0 + x[0]);
                return sigmoid(z);
            });
            const auto x = random_vector(rng, m, 0.1);
            KernelShapConfig c;
            c.mode = mode;
            c.num_coalitions = 512;
            c.seed = static_cast<std::uint64_t>(trial);
            const auto phi = explain_kernel_shap(x, f, c);
            std::vector<double> zero(m, 0.0);
            const double gap = f.score(x).of(phi.target) - f.score(std::span<const double>(zero)).of(phi.target);
            const double sum = std::accumulate(phi.values.begin(), phi.values.end(), 0.0);
            CHECK(std::abs(sum - gap) <= 1e-8);
            CHECK(phi.intercept == doctest::Approx(f.score(std::span<const double>(zero)).of(phi.target)));
        }
    }
}

TEST_CASE("duplicate features in an exchangeable scorer get equal values") {
    FunctionScorer f(4, [](std::span<const double> x) { return sigmoid(x[0] + x[1] + 0.5 * x[0] * x[1] - 0.3 * x[2]); });
    const auto phi = explain_kernel_shap(vec({0.7, 0.7, 0.4, 0.0}), f);
    CHECK(std::abs(phi.values[0] - phi.values[1]) <= 1e-8);
    CHECK(phi.values[3] == 0.0);
}

TEST_CASE("sampled kernel SHAP approaches the exact values as the budget grows") {
    const std::size_t m = 10;
    FunctionScorer f(m, [](std::span<const double> x) {
        double z = -0.5;
        for (std::size_t i = 0; i < x.size(); ++i) z += (static_cast<double>(i) - 4.5) * 0.3 * x[i];
        z += x[2] * x[7];
        return sigmoid(z);
    });
    Rng rng(3);
    for (int probe = 0; probe < 3; ++probe) {
        const auto x = random_vector(rng, m, 0.0);
        KernelShapConfig exact;
        exact.mode = ShapMode::exact;
        const auto ref = explain_kernel_shap(x, f, exact);
        double last_error = 0.0;
        for (std::size_t budget : {64, 8192}) {
            KernelShapConfig c;
            c.mode = ShapMode::sampled;
            c.num_coalitions = budget;
            c.seed = 11;
            const auto phi = explain_kernel_shap(x, f, c);
            last_error = 0.0;
            for (std::size_t i = 0; i < m; ++i) last_error = std::max(last_error, std::abs(phi.values[i] - ref.values[i]));
        }
        CHECK(last_error <= 1e-2);
    }
}

TEST_CASE("kernel SHAP is deterministic and checks its budget") {
    FunctionScorer f(20, [](std::span<const double> x) { return sigmoid(x[0] - x[5] + 0.2 * x[9]); });
    Rng rng(1);
    const auto x = random_vector(rng, 20, 0.0);
    KernelShapConfig c;
    c.seed = 5;
    const auto a = explain_kernel_shap(x, f, c);
    const auto b = explain_kernel_shap(x, f, c);
    CHECK(a.values == b.values);
    c.num_coalitions = 5;
    CHECK_THROWS_WITH_AS(explain_kernel_shap(x, f, c), doctest::Contains("budget"), Error);
    CHECK_THROWS_AS(explain_kernel_shap(vec(std::vector<double>(20, 0.0)), f), Error);
}

TEST_CASE("LIME coefficients rank-correlate with linear contributions") {
    Rng rng(31);
    std::size_t passed = 0;
    for (int probe = 0; probe < 20; ++probe) {
        const std::size_t m = 10;
        std::vector<double> w(m);
        for (auto& e : w) e = 2.0 * rng.uniform() - 1.0;
        FunctionScorer f(m, [w](std::span<const double> x) {
            double z = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
            return 0.5 + 0.04 * z;  // stays inside (0, 1), so the target is exactly linear
        });
        const auto x = random_vector(rng, m, 0.0);
        LimeConfig c;
        c.seed = static_cast<std::uint64_t>(probe);
        c.target = Label::malware;
        const auto coef = explain_lime(x, f, c);
        std::vector<double> truth(m);
        for (std::size_t i = 0; i < m; ++i) truth[i] = w[i] * x[i];
        passed += oracle::spearman(coef.values, truth) >= 0.9 ? 1 : 0;
    }
    CHECK(passed == 20);
}

TEST_CASE("LIME on a constant scorer gives zero coefficients") {
    FunctionScorer f(6, [](std::span<const double>) { return 0.4; });
    const auto coef = explain_lime(vec({0.1, 0.2, 0.0, 0.4, 0.5, 0.6}), f);
    for (double v : coef.values) CHECK(std::abs(v) <= 1e-8);
    CHECK(coef.intercept == doctest::Approx(0.6));
    CHECK(coef.target == Label::benign);
}

TEST_CASE("LIME is deterministic for a seed and zero on absent features") {
    FunctionScorer f(8, [](std::span<const double> x) { return sigmoid(x[0] - x[1] + x[2] * x[3] - 0.4 * x[6]); });
    const auto x = vec({0.5, 0.2, 0.0, 0.9, 0.3, 0.0, 0.8, 0.1});
    LimeConfig c;
    c.seed = 4;
    c.workers = 3;
    const auto a = explain_lime(x, f, c);
    c.workers = 1;
    const auto b = explain_lime(x, f, c);
    CHECK(a.values == b.values);
    CHECK(a.values[2] == 0.0);
    CHECK(a.values[5] == 0.0);
    c.seed = 5;
    CHECK(explain_lime(x, f, c).values != a.values);
    c.num_samples = 3;
    CHECK_THROWS_AS(explain_lime(x, f, c), Error);
}

TEST_CASE("explain methods parse") {
    CHECK(parse_explain_method("mpt") == ExplainMethod::mpt);
    CHECK(parse_explain_method("lime") == ExplainMethod::lime);
    CHECK(parse_explain_method("kshap") == ExplainMethod::kshap);
    CHECK(to_string(ExplainMethod::kshap) == "kshap");
    CHECK_THROWS_AS(parse_explain_method("lemna"), Error);
}
