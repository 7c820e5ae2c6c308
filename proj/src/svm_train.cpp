#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "mptx/error.hpp"
#include "mptx/models.hpp"
#include "mptx/random.hpp"

namespace mptx {

namespace {

struct SparseRow {
    std::vector<std::uint32_t> index;
    std::vector<double> value;
    double sq_norm = 0.0;
};

SparseRow sparsify(std::span<const double> x) {
    SparseRow row;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) {
            row.index.push_back(static_cast<std::uint32_t>(i));
            row.value.push_back(x[i]);
            row.sq_norm += x[i] * x[i];
        }
    }
    return row;
}

double sparse_dot(const SparseRow& a, const SparseRow& b) {
    double acc = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.index.size() && j < b.index.size()) {
        if (a.index[i] == b.index[j]) {
            acc += a.value[i++] * b.value[j++];
        } else if (a.index[i] < b.index[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return acc;
}

double sign(Label label) { return label == Label::malware ? 1.0 : -1.0; }

struct Problem {
    std::vector<SparseRow> rows;
    std::vector<double> y;
    std::size_t dimension = 0;
    std::uint64_t vocabulary = 0;
};

Problem make_problem(std::span<const LabeledVector> dataset) {
    if (dataset.empty()) {
        fail(ErrorCode::invalid_argument, "training data is empty");
    }
    Problem p;
    p.dimension = dataset.front().x.size();
    p.vocabulary = dataset.front().x.vocabulary;
    bool has_malware = false;
    bool has_benign = false;
    for (const auto& item : dataset) {
        if (item.x.size() != p.dimension || item.x.vocabulary != p.vocabulary) {
            fail(ErrorCode::dimension_mismatch,
                 "training vectors do not share one vocabulary (sample '" + item.id + "')");
        }
        p.rows.push_back(sparsify(item.x.values));
        p.y.push_back(sign(item.label));
        (item.label == Label::malware ? has_malware : has_benign) = true;
    }
    if (!has_malware || !has_benign) {
        fail(ErrorCode::invalid_argument, "training data contains a single class");
    }
    return p;
}

struct LinearFit {
    std::vector<double> w;
    double b = 0.0;
};

// Pegasos: SGD on lambda/2 |w|^2 + mean hinge, with the bias as an extra
// constant-one feature, projection onto the 1/sqrt(lambda) ball and
// iterate averaging over the second half of the run.
LinearFit fit_linear(const Problem& p, std::span<const std::size_t> rows, double c,
                     std::size_t epochs, Rng& rng) {
    const std::size_t n = rows.size();
    const std::size_t m = p.dimension;
    const double lambda = 1.0 / (c * static_cast<double>(n));
    const std::size_t total = std::max<std::size_t>(epochs * n, 20000);
    const std::size_t average_from = total / 2;

    std::vector<double> w(m + 1, 0.0);
    std::vector<double> avg(m + 1, 0.0);
    double scale = 1.0;  // true weights are scale * w
    std::size_t averaged = 0;
    std::vector<std::size_t> order(rows.begin(), rows.end());
    const double radius = 1.0 / std::sqrt(lambda);

    std::size_t t = 0;
    while (t < total) {
        rng.shuffle(std::span(order));
        for (std::size_t r : order) {
            if (t >= total) {
                break;
            }
            ++t;
            const auto& row = p.rows[r];
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            double margin = w[m];
            for (std::size_t k = 0; k < row.index.size(); ++k) {
                margin += w[row.index[k]] * row.value[k];
            }
            margin *= scale * p.y[r];

            const double shrink = 1.0 - eta * lambda;
            if (shrink <= 0.0) {
                std::fill(w.begin(), w.end(), 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if (margin < 1.0) {
                const double step = eta * p.y[r] / scale;
                for (std::size_t k = 0; k < row.index.size(); ++k) {
                    w[row.index[k]] += step * row.value[k];
                }
                w[m] += step;
            }
            double norm_sq = 0.0;
            for (double v : w) {
                norm_sq += v * v;
            }
            const double norm = std::abs(scale) * std::sqrt(norm_sq);
            if (norm > radius) {
                scale *= radius / norm;
            }
            if (scale < 1e-100) {
                for (double& v : w) {
                    v *= scale;
                }
                scale = 1.0;
            }
            if (t > average_from) {
                for (std::size_t k = 0; k <= m; ++k) {
                    avg[k] += scale * w[k];
                }
                ++averaged;
            }
        }
    }
    LinearFit fit;
    fit.w.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        fit.w[k] = avg[k] / static_cast<double>(averaged);
    }
    fit.b = avg[m] / static_cast<double>(averaged);
    return fit;
}

double linear_decision(const LinearFit& fit, const SparseRow& row) {
    double acc = fit.b;
    for (std::size_t k = 0; k < row.index.size(); ++k) {
        acc += fit.w[row.index[k]] * row.value[k];
    }
    return acc;
}

struct RbfFit {
    std::vector<std::size_t> support;  // indices into Problem rows
    std::vector<double> coef;          // alpha * y
    double bias = 0.0;
};

// Dual coordinate ascent on the bias-augmented kernel K + 1 with box [0, c].
RbfFit fit_rbf(const Problem& p, std::span<const std::size_t> rows, double c, double gamma,
               std::size_t max_passes, double tolerance, Rng& rng) {
    const std::size_t n = rows.size();
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ri = p.rows[rows[i]];
        q[i * n + i] = 2.0;
        for (std::size_t j = 0; j < i; ++j) {
            const auto& rj = p.rows[rows[j]];
            const double dist = std::max(0.0, ri.sq_norm + rj.sq_norm - 2.0 * sparse_dot(ri, rj));
            const double v = p.y[rows[i]] * p.y[rows[j]] * (std::exp(-gamma * dist) + 1.0);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }

    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t pass = 0;
    for (; pass < max_passes; ++pass) {
        rng.shuffle(std::span(order));
        double max_violation = 0.0;
        for (std::size_t i : order) {
            const double g = grad[i];
            double pg = g;
            if (alpha[i] <= 0.0) {
                pg = std::min(g, 0.0);
            } else if (alpha[i] >= c) {
                pg = std::max(g, 0.0);
            }
            max_violation = std::max(max_violation, std::abs(pg));
            if (std::abs(pg) < 1e-12) {
                continue;
            }
            const double old = alpha[i];
            alpha[i] = std::clamp(old - g / q[i * n + i], 0.0, c);
            const double delta = alpha[i] - old;
            if (delta != 0.0) {
                const double* col = q.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    grad[j] += delta * col[j];
                }
            }
        }
        if (max_violation < tolerance) {
            break;
        }
    }
    spdlog::debug("rbf dual ascent: c={} gamma={} passes={}", c, gamma, pass + 1);

    RbfFit fit;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0.0) {
            fit.support.push_back(rows[i]);
            fit.coef.push_back(alpha[i] * p.y[rows[i]]);
            fit.bias += alpha[i] * p.y[rows[i]];
        }
    }
    return fit;
}

double rbf_decision(const Problem& p, const RbfFit& fit, double gamma, const SparseRow& row) {
    double acc = fit.bias;
    for (std::size_t s = 0; s < fit.support.size(); ++s) {
        const auto& sv = p.rows[fit.support[s]];
        const double dist = std::max(0.0, sv.sq_norm + row.sq_norm - 2.0 * sparse_dot(sv, row));
        acc += fit.coef[s] * std::exp(-gamma * dist);
    }
    return acc;
}

struct AnyFit {
    LinearFit linear;
    RbfFit rbf;
};

AnyFit fit_any(const Problem& p, std::span<const std::size_t> rows, double c,
               const TrainConfig& config, Rng& rng) {
    AnyFit fit;
    if (config.kind == ModelKind::linear_svm) {
        fit.linear = fit_linear(p, rows, c, config.epochs, rng);
    } else {
        fit.rbf = fit_rbf(p, rows, c, config.gamma, config.max_passes, config.tolerance, rng);
    }
    return fit;
}

double decide(const Problem& p, const AnyFit& fit, const TrainConfig& config, const SparseRow& row) {
    return config.kind == ModelKind::linear_svm ? linear_decision(fit.linear, row)
                                                : rbf_decision(p, fit.rbf, config.gamma, row);
}

double accuracy(const Problem& p, const AnyFit& fit, const TrainConfig& config,
                std::span<const std::size_t> rows) {
    std::size_t correct = 0;
    for (std::size_t r : rows) {
        const double d = decide(p, fit, config, p.rows[r]);
        correct += (d >= 0.0 ? 1.0 : -1.0) == p.y[r];
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

// Per-class shuffle, then the first `fraction` of each class is held out.
void stratified_split(std::span<const double> y, double fraction, Rng& rng,
                      std::vector<std::size_t>& train_rows, std::vector<std::size_t>& held_rows) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < y.size(); ++i) {
        (y[i] > 0 ? pos : neg).push_back(i);
    }
    for (auto* group : {&pos, &neg}) {
        rng.shuffle(std::span(*group));
        const auto held = static_cast<std::size_t>(static_cast<double>(group->size()) * fraction);
        held_rows.insert(held_rows.end(), group->begin(), group->begin() + static_cast<long>(held));
        train_rows.insert(train_rows.end(), group->begin() + static_cast<long>(held), group->end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(held_rows.begin(), held_rows.end());
}

}  // namespace

TrainedModel train(std::span<const LabeledVector> dataset, const TrainConfig& config) {
    const Problem p = make_problem(dataset);
    if (config.kind == ModelKind::rbf_svm && !(config.gamma > 0.0)) {
        fail(ErrorCode::invalid_argument, "rbf kernel gamma must be positive");
    }
    std::vector<double> grid = config.c_grid;
    if (grid.empty()) {
        grid = config.kind == ModelKind::linear_svm ? std::vector<double>{1.0, 10.0, 100.0}
                                                    : std::vector<double>{1.0, 10.0};
    }
    for (double c : grid) {
        if (!(c > 0.0)) {
            fail(ErrorCode::invalid_argument, "regularization grid values must be positive");
        }
    }

    Rng rng(config.seed);
    std::vector<std::size_t> all(p.rows.size());
    std::iota(all.begin(), all.end(), 0);

    double best_c = grid.front();
    if (grid.size() > 1) {
        std::vector<std::size_t> fit_rows;
        std::vector<std::size_t> valid_rows;
        if (p.rows.size() >= 20 && config.validation_fraction > 0.0) {
            stratified_split(p.y, config.validation_fraction, rng, fit_rows, valid_rows);
        }
        const bool has_validation = !valid_rows.empty() &&
                                    std::any_of(fit_rows.begin(), fit_rows.end(), [&](auto r) { return p.y[r] > 0; }) &&
                                    std::any_of(fit_rows.begin(), fit_rows.end(), [&](auto r) { return p.y[r] < 0; });
        if (!has_validation) {
            fit_rows = all;
            valid_rows = all;
        }
        double best_accuracy = -1.0;
        for (double c : grid) {
            Rng fold_rng = rng.split(static_cast<std::uint64_t>(c * 1000.0));
            const auto fit = fit_any(p, fit_rows, c, config, fold_rng);
            const double acc = accuracy(p, fit, config, valid_rows);
            spdlog::debug("grid c={} validation accuracy={:.4f}", c, acc);
            if (acc > best_accuracy) {
                best_accuracy = acc;
                best_c = c;
            }
        }
    }

    Rng final_rng = rng.split(0xF17A1);
    const auto fit = fit_any(p, all, best_c, config, final_rng);
    std::vector<double> decisions;
    std::vector<Label> labels;
    decisions.reserve(all.size());
    for (std::size_t r : all) {
        decisions.push_back(decide(p, fit, config, p.rows[r]));
        labels.push_back(p.y[r] > 0 ? Label::malware : Label::benign);
    }
    const Calibration cal = fit_calibration(decisions, labels);
    const Hyperparameters hyper{best_c, config.gamma};

    if (config.kind == ModelKind::linear_svm) {
        return TrainedModel::make_linear(fit.linear.w, fit.linear.b, hyper, cal, p.vocabulary);
    }
    if (fit.rbf.support.empty()) {
        fail(ErrorCode::numerical, "rbf training produced no support vectors");
    }
    std::vector<std::vector<double>> support;
    support.reserve(fit.rbf.support.size());
    for (std::size_t r : fit.rbf.support) {
        support.push_back(dataset[r].x.values);
    }
    return TrainedModel::make_rbf(std::move(support), fit.rbf.coef, fit.rbf.bias, hyper, cal,
                                  p.vocabulary);
}

TrainedModel train_surrogate(const Scorer& teacher, std::span<const FeatureVector> dataset,
                             const SurrogateConfig& config) {
    if (dataset.empty()) {
        fail(ErrorCode::invalid_argument, "surrogate training data is empty");
    }
    std::vector<LabeledVector> labeled;
    labeled.reserve(dataset.size());
    std::vector<double> y;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Label l = teacher.score(dataset[i]).predicted();
        labeled.push_back(LabeledVector{dataset[i], l, "x" + std::to_string(i)});
        y.push_back(sign(l));
    }
    const bool both = std::any_of(y.begin(), y.end(), [](double v) { return v > 0; }) &&
                      std::any_of(y.begin(), y.end(), [](double v) { return v < 0; });
    if (!both) {
        fail(ErrorCode::invalid_argument, "degenerate teacher: it predicts a single class");
    }

    Rng rng(config.train.seed ^ 0x5a77e6a7eULL);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> held_rows;
    stratified_split(y, std::clamp(config.holdout_fraction, 0.0, 0.9), rng, train_rows, held_rows);
    if (held_rows.empty()) {
        held_rows = train_rows;
    }
    std::vector<LabeledVector> train_set;
    train_set.reserve(train_rows.size());
    for (std::size_t r : train_rows) {
        train_set.push_back(labeled[r]);
    }
    TrainedModel model = train(train_set, config.train);

    std::size_t agree = 0;
    for (std::size_t r : held_rows) {
        agree += model.score(labeled[r].x).predicted() == labeled[r].label;
    }
    const auto info = teacher.info();
    model.set_surrogate(SurrogateInfo{info.kind, info.fingerprint,
                                      static_cast<double>(agree) / static_cast<double>(held_rows.size()),
                                      held_rows.size()});
    return model;
}

}  // namespace mptx
