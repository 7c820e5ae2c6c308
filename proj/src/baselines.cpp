#include "mptx/baselines.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "mptx/error.hpp"
#include "mptx/parallel.hpp"
#include "mptx/random.hpp"

namespace mptx {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(ExplainMethod method) noexcept {
    switch (method) {
        case ExplainMethod::mpt: return "mpt";
        case ExplainMethod::lime: return "lime";
        case ExplainMethod::kshap: return "kshap";
    }
    return "?";
}

ExplainMethod parse_explain_method(std::string_view text) {
    if (text == "mpt") return ExplainMethod::mpt;
    if (text == "lime") return ExplainMethod::lime;
    if (text == "kshap") return ExplainMethod::kshap;
    fail(ErrorCode::invalid_argument, "unknown explanation method '" + std::string(text) + "' (mpt|lime|kshap)");
}

namespace {

std::vector<std::size_t> present_features(const FeatureVector& x) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.values[i] != 0.0) out.push_back(i);
    }
    if (out.empty()) fail(ErrorCode::invalid_argument, "cannot explain an all-zero vector");
    return out;
}

// Target-class probability of x with present feature j kept iff mask(j) is set.
struct MaskedScorer {
    const FeatureVector& x;
    const Scorer& scorer;
    const std::vector<std::size_t>& present;
    Label target;

    double operator()(const auto& mask) const {
        std::vector<double> point = x.values;
        for (std::size_t j = 0; j < present.size(); ++j) {
            if (!mask[static_cast<Index>(j)]) point[present[j]] = 0.0;
        }
        return scorer.score(std::span<const double>(point)).of(target);
    }
};

Label resolve_target(const FeatureVector& x, const Scorer& scorer, std::optional<Label> target) {
    check_dimension(scorer, x.size());
    return target.value_or(scorer.score(x).predicted());
}

}  // namespace

BaselineAttribution explain_lime(const FeatureVector& x, const Scorer& scorer, const LimeConfig& config) {
    const Label target = resolve_target(x, scorer, config.target);
    const auto present = present_features(x);
    const std::size_t m = present.size();
    if (config.num_samples < m + 2) {
        fail(ErrorCode::invalid_argument, "LIME needs at least " + std::to_string(m + 2) + " samples for " +
                                              std::to_string(m) + " present features");
    }
    if (!(config.ridge >= 0.0)) fail(ErrorCode::invalid_argument, "ridge must be non-negative");
    const double width = config.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(m)));
    if (!(width > 0.0)) fail(ErrorCode::invalid_argument, "kernel width must be positive");

    const Index n = static_cast<Index>(config.num_samples);
    const Index mi = static_cast<Index>(m);
    MatrixXd z = MatrixXd::Ones(n, mi);
    Rng rng(config.seed);
    std::vector<std::size_t> order(m);
    for (Index s = 1; s < n; ++s) {
        // Number of masked features uniform in [1, M], then a uniform subset of that size.
        const std::size_t off = 1 + rng.index(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t j = 0; j < off; ++j) z(s, static_cast<Index>(order[j])) = 0.0;
    }
    bool varied = false;
    for (Index s = 1; s < n && !varied; ++s) varied = z.row(s) != z.row(0);
    if (!varied) fail(ErrorCode::numerical, "LIME neighbourhood is degenerate: all masks identical");

    const MaskedScorer f{x, scorer, present, target};
    VectorXd y(n);
    parallel_for(static_cast<std::size_t>(n), config.workers, [&](std::size_t s) {
        y[static_cast<Index>(s)] = f(z.row(static_cast<Index>(s)));
    });

    VectorXd w(n);
    for (Index s = 0; s < n; ++s) {
        const double d = static_cast<double>(mi) - z.row(s).sum();
        w[s] = std::exp(-(d * d) / (width * width));
    }
    const double wsum = w.sum();
    const VectorXd zbar = (z.transpose() * w) / wsum;
    const double ybar = w.dot(y) / wsum;
    const MatrixXd zc = z.rowwise() - zbar.transpose();
    const VectorXd yc = y.array() - ybar;
    MatrixXd normal = zc.transpose() * w.asDiagonal() * zc;
    normal.diagonal().array() += config.ridge;
    Eigen::LDLT<MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        fail(ErrorCode::numerical, "LIME regression is singular");
    }
    const VectorXd coef = ldlt.solve(zc.transpose() * (w.asDiagonal() * yc));

    BaselineAttribution out;
    out.values.assign(x.size(), 0.0);
    for (std::size_t j = 0; j < m; ++j) out.values[present[j]] = coef[static_cast<Index>(j)];
    out.intercept = ybar - coef.dot(zbar);
    out.target = target;
    out.evaluations = config.num_samples;
    return out;
}

BaselineAttribution explain_kernel_shap(const FeatureVector& x, const Scorer& scorer,
                                        const KernelShapConfig& config) {
    const Label target = resolve_target(x, scorer, config.target);
    const auto present = present_features(x);
    const std::size_t m = present.size();
    const MaskedScorer f{x, scorer, present, target};

    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> none = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>::Zero(static_cast<Index>(m));
    const double v_empty = f(none);
    const double v_full = scorer.score(x).of(target);
    const double delta = v_full - v_empty;

    BaselineAttribution out;
    out.values.assign(x.size(), 0.0);
    out.intercept = v_empty;
    out.target = target;
    out.evaluations = 2;
    if (m == 1) {
        out.values[present[0]] = delta;
        return out;
    }

    const bool exact = config.mode == ShapMode::exact ||
                       (config.mode == ShapMode::automatic && m <= config.exact_limit);
    const Index mi = static_cast<Index>(m);
    MatrixXd z;
    VectorXd w;
    if (exact) {
        if (m > 24) fail(ErrorCode::invalid_argument, "exact kernel SHAP is limited to 24 present features");
        const std::size_t total = (std::size_t{1} << m) - 2;
        z.resize(static_cast<Index>(total), mi);
        w.resize(static_cast<Index>(total));
        for (std::size_t c = 1; c <= total; ++c) {
            const Index row = static_cast<Index>(c - 1);
            std::size_t size = 0;
            for (std::size_t j = 0; j < m; ++j) {
                const bool on = (c >> j) & 1U;
                z(row, static_cast<Index>(j)) = on ? 1.0 : 0.0;
                size += on;
            }
            // (M - 1) / (C(M, s) s (M - s))
            const double s = static_cast<double>(size);
            const double md = static_cast<double>(m);
            const double log_binom = std::lgamma(md + 1) - std::lgamma(s + 1) - std::lgamma(md - s + 1);
            w[row] = (md - 1.0) / (std::exp(log_binom) * s * (md - s));
        }
    } else {
        if (config.num_coalitions < m + 1) {
            fail(ErrorCode::invalid_argument, "coalition budget " + std::to_string(config.num_coalitions) +
                                                  " is too small for " + std::to_string(m) +
                                                  " present features; raise the budget to at least " +
                                                  std::to_string(m + 1));
        }
        // Coalition sizes drawn with probability proportional to the kernel mass of each size;
        // each draw is paired with its complement and all rows weigh the same.
        std::vector<double> cumulative(m - 1);
        double acc = 0.0;
        for (std::size_t s = 1; s < m; ++s) {
            acc += 1.0 / (static_cast<double>(s) * static_cast<double>(m - s));
            cumulative[s - 1] = acc;
        }
        const std::size_t pairs = (config.num_coalitions + 1) / 2;
        z = MatrixXd::Zero(static_cast<Index>(2 * pairs), mi);
        w = VectorXd::Ones(static_cast<Index>(2 * pairs));
        Rng rng(config.seed);
        std::vector<std::size_t> order(m);
        for (std::size_t p = 0; p < pairs; ++p) {
            const double u = rng.uniform() * acc;
            const std::size_t size =
                1 + static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(order));
            const Index a = static_cast<Index>(2 * p);
            z.row(a + 1).setOnes();
            for (std::size_t j = 0; j < std::min(size, m - 1); ++j) {
                z(a, static_cast<Index>(order[j])) = 1.0;
                z(a + 1, static_cast<Index>(order[j])) = 0.0;
            }
        }
    }

    const Index n = z.rows();
    VectorXd v(n);
    parallel_for(static_cast<std::size_t>(n), config.workers, [&](std::size_t r) {
        v[static_cast<Index>(r)] = f(z.row(static_cast<Index>(r)));
    });
    out.evaluations += static_cast<std::size_t>(n);

    // Eliminate the last coordinate: phi_last = delta - sum(phi_rest).
    const MatrixXd xr = z.leftCols(mi - 1).colwise() - z.col(mi - 1);
    const VectorXd yr = (v.array() - v_empty).matrix() - z.col(mi - 1) * delta;
    const MatrixXd normal = xr.transpose() * w.asDiagonal() * xr;
    Eigen::LDLT<MatrixXd> ldlt(normal);
    const double scale = normal.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(scale, 1e-300)) {
        fail(ErrorCode::numerical, "kernel SHAP regression is singular; raise the coalition budget");
    }
    const VectorXd phi = ldlt.solve(xr.transpose() * (w.asDiagonal() * yr));

    double rest = 0.0;
    for (std::size_t j = 0; j + 1 < m; ++j) {
        out.values[present[j]] = phi[static_cast<Index>(j)];
        rest += phi[static_cast<Index>(j)];
    }
    out.values[present[m - 1]] = delta - rest;
    return out;
}

}  // namespace mptx
