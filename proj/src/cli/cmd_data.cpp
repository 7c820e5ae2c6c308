#include <iostream>

#include <spdlog/spdlog.h>

#include "cli/common.hpp"
#include "mptx/error.hpp"
#include "mptx/hash.hpp"

namespace mptx::cli {

namespace {

json metrics_json(const ClassificationReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json out{{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}, {"accuracy", r.accuracy},
             {"tpr", opt(r.tpr)}, {"fpr", opt(r.fpr)}, {"mcc", opt(r.mcc)}};
    if (!r.mcc) out["mcc_note"] = r.mcc_note;
    return out;
}

void emit_report(const Context& ctx, json report, const std::string& out_path) {
    report["run_config"] = ctx.run_config;
    const auto text = report.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_output(out_path, text);
    }
}

std::vector<Sample> subset(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(samples[i]);
    return out;
}

}  // namespace

void register_corpus(CLI::App& root, Registry& registry) {
    auto* corpus = root.add_subcommand("corpus", "Generate or summarise corpora");
    corpus->require_subcommand(1);

    auto gen = std::make_shared<SyntheticConfig>();
    auto gen_out = std::make_shared<std::string>();
    auto* g = corpus->add_subcommand("gen", "Write a synthetic corpus with planted class signals");
    g->add_option("--out", *gen_out, "Output JSONL corpus")->required();
    g->add_option("--malware", gen->malware, "Malware samples");
    g->add_option("--benign", gen->benign, "Benign samples");
    g->add_option("--vocab", gen->vocab_size, "Vocabulary size");
    g->add_option("--signal", gen->signal, "Planted tokens per class");
    g->add_option("--noise", gen->noise, "Signal dropout and leak rate")->check(CLI::Range(0.0, 1.0));
    g->add_option("--background", gen->background_tokens, "Mean background tokens per sample");
    g->add_option("--permission-share", gen->permission_share, "Share of permission tokens")
        ->check(CLI::Range(0.0, 1.0));
    registry.push_back({g, [gen, gen_out](const Context& ctx) {
                            SyntheticConfig cfg = *gen;
                            cfg.seed = ctx.seed;
                            const auto samples = generate_synthetic(cfg);
                            write_output(*gen_out, serialize_corpus(samples));
                            spdlog::info("wrote {} samples to {}", samples.size(), *gen_out);
                        }});

    auto stats_in = std::make_shared<std::string>();
    auto stats_out = std::make_shared<std::string>();
    auto* s = corpus->add_subcommand("stats", "Summarise a corpus");
    s->add_option("corpus", *stats_in, "Corpus JSONL")->required();
    s->add_option("--out", *stats_out, "Report JSON (default: stdout)");
    registry.push_back({s, [stats_in, stats_out](const Context& ctx) {
                            const auto samples = load_corpus(*stats_in);
                            const auto st = corpus_stats(samples);
                            json per_category = json::object();
                            for (std::size_t c = 0; c < kCategoryCount; ++c) {
                                per_category[std::string(to_string(static_cast<Category>(c + 1)))] =
                                    st.per_category[c];
                            }
                            emit_report(ctx,
                                        {{"samples", st.samples},
                                         {"malware", st.malware},
                                         {"benign", st.benign},
                                         {"tokens", st.tokens},
                                         {"distinct_tokens", st.distinct_tokens},
                                         {"families", st.families},
                                         {"per_category", per_category}},
                                        *stats_out);
                        }});
}

void register_model(CLI::App& root, Registry& registry) {
    auto* model = root.add_subcommand("model", "Train, distill and evaluate classifiers");
    model->require_subcommand(1);

    struct TrainFlags {
        std::string corpus, out, report, kind = "linear", encoding = "tfidf";
        double gamma = 1.0;
        std::vector<double> c;
        double holdout = 0.2;
        std::size_t epochs = 40;
    };
    auto tf = std::make_shared<TrainFlags>();
    auto* t = model->add_subcommand("train", "Fit vocabulary and classifier on a corpus");
    t->add_option("--corpus", tf->corpus, "Training corpus JSONL")->required();
    t->add_option("--out", tf->out, "Output model JSON")->required();
    t->add_option("--report", tf->report, "Held-out metrics JSON (default: stdout)");
    t->add_option("--kind", tf->kind, "linear|rbf")->check(CLI::IsMember({"linear", "rbf", "linear_svm", "rbf_svm"}));
    t->add_option("--encoding", tf->encoding, "tfidf|binary")->check(CLI::IsMember({"tfidf", "binary"}));
    t->add_option("--gamma", tf->gamma, "RBF width")->check(CLI::PositiveNumber);
    t->add_option("--c", tf->c, "C grid (comma separated); default depends on kind")->delimiter(',');
    t->add_option("--holdout", tf->holdout, "Stratified held-out fraction")->check(CLI::Range(0.0, 0.9));
    t->add_option("--epochs", tf->epochs, "Linear SGD passes");
    registry.push_back({t, [tf](const Context& ctx) {
                            const auto samples = load_corpus(tf->corpus);
                            const auto split = stratified_holdout(samples, tf->holdout, ctx.seed);
                            const auto train_set = subset(samples, split.train);
                            const auto test_set = subset(samples, split.test);
                            const auto vocab = fit_vocabulary(train_set, parse_encoding(tf->encoding));

                            TrainConfig cfg;
                            cfg.kind = parse_model_kind(tf->kind);
                            cfg.gamma = tf->gamma;
                            cfg.c_grid = tf->c;
                            cfg.epochs = tf->epochs;
                            cfg.seed = ctx.seed;
                            auto m = train(embed_all(train_set, vocab), cfg);
                            m.attach_vocabulary(vocab);

                            json report{{"model_fingerprint", to_hex(m.fingerprint())},
                                        {"kind", std::string(to_string(m.kind()))},
                                        {"c", m.hyperparameters().c},
                                        {"vocabulary", vocab.size()},
                                        {"train", metrics_json(classify_metrics(m, embed_all(train_set, vocab)))}};
                            if (!test_set.empty()) {
                                report["holdout"] = metrics_json(classify_metrics(m, embed_all(test_set, vocab)));
                            }
                            save_model(m, tf->out);
                            emit_report(ctx, std::move(report), tf->report);
                        }});

    struct DistillFlags {
        std::string teacher, corpus, out, report, kind = "linear";
        double holdout = 0.25;
        double gamma = 1.0;
    };
    auto df = std::make_shared<DistillFlags>();
    auto* d = model->add_subcommand("distill", "Train a surrogate on a teacher's predicted labels");
    d->add_option("--teacher", df->teacher, "Teacher model JSON")->required();
    d->add_option("--corpus", df->corpus, "Corpus JSONL")->required();
    d->add_option("--out", df->out, "Output surrogate model JSON")->required();
    d->add_option("--report", df->report, "Agreement report JSON (default: stdout)");
    d->add_option("--kind", df->kind, "Surrogate kind: linear|rbf")
        ->check(CLI::IsMember({"linear", "rbf", "linear_svm", "rbf_svm"}));
    d->add_option("--gamma", df->gamma, "RBF width of the surrogate")->check(CLI::PositiveNumber);
    d->add_option("--holdout", df->holdout, "Held-out fraction for agreement")->check(CLI::Range(0.0, 0.9));
    registry.push_back({d, [df](const Context& ctx) {
                            const auto teacher = load_model_with_vocabulary(df->teacher);
                            const auto& vocab = *teacher.vocabulary();
                            const auto samples = load_corpus(df->corpus);
                            std::vector<FeatureVector> xs;
                            xs.reserve(samples.size());
                            for (const auto& s : samples) xs.push_back(embed(s, vocab));

                            SurrogateConfig cfg;
                            cfg.train.kind = parse_model_kind(df->kind);
                            cfg.train.gamma = df->gamma;
                            cfg.train.seed = ctx.seed;
                            cfg.holdout_fraction = df->holdout;
                            auto m = train_surrogate(teacher, xs, cfg);
                            m.attach_vocabulary(vocab);
                            save_model(m, df->out);
                            emit_report(ctx,
                                        {{"model_fingerprint", to_hex(m.fingerprint())},
                                         {"teacher_fingerprint", to_hex(teacher.fingerprint())},
                                         {"agreement", m.surrogate()->agreement},
                                         {"holdout", m.surrogate()->holdout}},
                                        df->report);
                        }});

    auto ef = std::make_shared<std::array<std::string, 3>>();
    auto* e = model->add_subcommand("eval", "TPR, FPR and MCC of a model on a corpus");
    e->add_option("--model", (*ef)[0], "Model JSON")->required();
    e->add_option("--corpus", (*ef)[1], "Corpus JSONL")->required();
    e->add_option("--out", (*ef)[2], "Report JSON (default: stdout)");
    registry.push_back({e, [ef](const Context& ctx) {
                            const auto m = load_model_with_vocabulary((*ef)[0]);
                            const auto samples = load_corpus((*ef)[1]);
                            const auto data = embed_all(samples, *m.vocabulary());
                            emit_report(ctx, {{"metrics", metrics_json(classify_metrics(m, data))}}, (*ef)[2]);
                        }});
}

}  // namespace mptx::cli
