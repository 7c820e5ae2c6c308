#include "mptx/models.hpp"

#include <algorithm>
#include <cmath>

#include "mptx/error.hpp"
#include "mptx/hash.hpp"

namespace mptx {

std::string_view to_string(ModelKind kind) noexcept {
    return kind == ModelKind::linear_svm ? "linear_svm" : "rbf_svm";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "linear" || text == "linear_svm") {
        return ModelKind::linear_svm;
    }
    if (text == "rbf" || text == "rbf_svm") {
        return ModelKind::rbf_svm;
    }
    fail(ErrorCode::invalid_argument, "unknown model kind '" + std::string(text) + "'");
}

ClassScores FunctionScorer::score(std::span<const double> x) const {
    check_dimension(*this, x.size());
    const double p = std::clamp(fn_(x), 0.0, 1.0);
    return ClassScores::from_malware(p);
}

void check_dimension(const Scorer& scorer, std::size_t size) {
    if (size != scorer.dimension()) {
        fail(ErrorCode::dimension_mismatch, "input has " + std::to_string(size) +
                                                " features, scorer expects " +
                                                std::to_string(scorer.dimension()));
    }
}

double Calibration::p_malware(double decision) const noexcept {
    const double z = slope * decision + offset;
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Calibration fit_calibration(std::span<const double> decisions, std::span<const Label> labels) {
    if (decisions.size() != labels.size() || decisions.empty()) {
        fail(ErrorCode::invalid_argument, "calibration: need one label per decision value");
    }
    // Lin, Lin & Weng's robust Newton iteration for Platt scaling, written
    // in the P(malware) = 1 / (1 + exp(A*d + B)) parameterisation.
    double prior1 = 0.0;
    double prior0 = 0.0;
    for (Label l : labels) {
        (l == Label::malware ? prior1 : prior0) += 1.0;
    }
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    const std::size_t n = decisions.size();
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) {
        target[i] = labels[i] == Label::malware ? hi : lo;
    }

    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = decisions[i] * a + b;
            f += z >= 0.0 ? target[i] * z + std::log1p(std::exp(-z))
                          : (target[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = objective(a, b);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = 1e-12;
        double h22 = 1e-12;
        double h21 = 0.0;
        double g1 = 0.0;
        double g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = decisions[i] * a + b;
            double p;
            double q;
            if (z >= 0.0) {
                const double e = std::exp(-z);
                p = e / (1.0 + e);
                q = 1.0 / (1.0 + e);
            } else {
                const double e = std::exp(z);
                p = 1.0 / (1.0 + e);
                q = e / (1.0 + e);
            }
            const double d2 = p * q;
            h11 += decisions[i] * decisions[i] * d2;
            h22 += d2;
            h21 += decisions[i] * d2;
            const double d1 = target[i] - p;
            g1 += decisions[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) {
            break;
        }
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        bool moved = false;
        while (step >= 1e-10) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) {
            break;
        }
    }
    Calibration cal{-a, -b};
    if (!(cal.slope > 0.0) || !std::isfinite(cal.slope)) {
        // No usable ordering signal in the decision values.
        cal.slope = 1e-6;
    }
    return cal;
}

TrainedModel TrainedModel::make_linear(std::vector<double> weights, double bias,
                                       Hyperparameters hyper, Calibration calibration,
                                       std::uint64_t vocabulary) {
    TrainedModel m;
    m.kind_ = ModelKind::linear_svm;
    m.dimension_ = weights.size();
    m.weights_ = std::move(weights);
    m.bias_ = bias;
    m.hyper_ = hyper;
    m.calibration_ = calibration;
    m.vocabulary_fp_ = vocabulary;
    m.finalize();
    return m;
}

TrainedModel TrainedModel::make_rbf(std::vector<std::vector<double>> support,
                                    std::vector<double> coefficients, double bias,
                                    Hyperparameters hyper, Calibration calibration,
                                    std::uint64_t vocabulary) {
    if (support.size() != coefficients.size() || support.empty()) {
        fail(ErrorCode::invalid_argument, "rbf model: need one coefficient per support vector");
    }
    if (!(hyper.gamma > 0.0)) {
        fail(ErrorCode::invalid_argument, "rbf model: gamma must be positive");
    }
    TrainedModel m;
    m.kind_ = ModelKind::rbf_svm;
    m.dimension_ = support.front().size();
    m.support_.reserve(support.size() * m.dimension_);
    for (const auto& row : support) {
        if (row.size() != m.dimension_) {
            fail(ErrorCode::dimension_mismatch, "rbf model: ragged support vectors");
        }
        m.support_.insert(m.support_.end(), row.begin(), row.end());
    }
    m.coef_ = std::move(coefficients);
    m.bias_ = bias;
    m.hyper_ = hyper;
    m.calibration_ = calibration;
    m.vocabulary_fp_ = vocabulary;
    m.finalize();
    return m;
}

void TrainedModel::finalize() {
    support_sq_norm_.assign(coef_.size(), 0.0);
    for (std::size_t s = 0; s < coef_.size(); ++s) {
        double acc = 0.0;
        for (double v : support_vector(s)) {
            acc += v * v;
        }
        support_sq_norm_[s] = acc;
    }
    Fnv1a hash;
    hash.text(to_string(kind_))
        .u64(dimension_)
        .f64(hyper_.c)
        .f64(hyper_.gamma)
        .f64s(weights_)
        .f64s(support_)
        .f64s(coef_)
        .f64(bias_)
        .f64(calibration_.slope)
        .f64(calibration_.offset)
        .u64(vocabulary_fp_);
    fingerprint_ = hash.digest();
}

std::span<const double> TrainedModel::support_vector(std::size_t i) const {
    return std::span<const double>(support_).subspan(i * dimension_, dimension_);
}

void TrainedModel::set_calibration(Calibration calibration) {
    calibration_ = calibration;
    finalize();
}

void TrainedModel::attach_vocabulary(Vocabulary vocab) {
    if (vocab.fingerprint() != vocabulary_fp_) {
        fail(ErrorCode::invalid_argument, "vocabulary fingerprint " + to_hex(vocab.fingerprint()) +
                                              " does not match model vocabulary " +
                                              to_hex(vocabulary_fp_));
    }
    vocabulary_ = std::move(vocab);
}

double TrainedModel::decision(std::span<const double> x) const {
    check_dimension(*this, x.size());
    if (kind_ == ModelKind::linear_svm) {
        double acc = bias_;
        for (std::size_t i = 0; i < dimension_; ++i) {
            acc += weights_[i] * x[i];
        }
        return acc;
    }

    // |x - s|^2 = |x|^2 + |s|^2 - 2 x.s, touching only the nonzeros of x.
    thread_local std::vector<std::size_t> nz;
    nz.clear();
    double x_sq = 0.0;
    for (std::size_t i = 0; i < dimension_; ++i) {
        if (x[i] != 0.0) {
            nz.push_back(i);
            x_sq += x[i] * x[i];
        }
    }
    double acc = bias_;
    for (std::size_t s = 0; s < coef_.size(); ++s) {
        const double* row = support_.data() + s * dimension_;
        double dot = 0.0;
        for (std::size_t i : nz) {
            dot += x[i] * row[i];
        }
        const double dist = std::max(0.0, x_sq + support_sq_norm_[s] - 2.0 * dot);
        acc += coef_[s] * std::exp(-hyper_.gamma * dist);
    }
    return acc;
}

ClassScores TrainedModel::score(std::span<const double> x) const {
    return ClassScores::from_malware(calibration_.p_malware(decision(x)));
}

}  // namespace mptx
