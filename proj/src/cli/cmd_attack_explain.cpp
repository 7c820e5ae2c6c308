#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "cli/common.hpp"
#include "mptx/adversarial.hpp"
#include "mptx/attribution.hpp"
#include "mptx/error.hpp"
#include "mptx/parallel.hpp"
#include "mptx/perturbation.hpp"
#include "mptx/plot.hpp"
#include "mptx/random.hpp"

namespace mptx::cli {

namespace {

struct AttackFlags {
    std::vector<std::string> models;
    std::string corpus, out, category = "permission", source = "benign";
    std::size_t bases = 20;
    std::size_t max_loop = 500;
    std::size_t population = 50;
    double mutation = 0.02;
    std::size_t per_bin = 0;
};

void run_attack(const AttackFlags& f, const Context& ctx) {
    std::vector<TrainedModel> models;
    for (const auto& p : f.models) models.push_back(load_model_with_vocabulary(p));
    const Vocabulary& vocab = *models.front().vocabulary();
    for (const auto& m : models) {
        if (m.vocabulary_fingerprint() != vocab.fingerprint()) {
            fail(ErrorCode::dimension_mismatch, "attack models must share one vocabulary");
        }
    }
    std::vector<const Scorer*> scorers;
    for (const auto& m : models) scorers.push_back(&m);

    const auto category = parse_category(f.category);
    if (!category) fail(ErrorCode::invalid_argument, "unknown category '" + f.category + "'");
    const PoolConfig pool_cfg{*category, parse_pool_source(f.source)};

    const auto samples = load_corpus(f.corpus);
    std::vector<std::size_t> detected;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].label != Label::malware) continue;
        const auto x = embed(samples[i], vocab);
        const bool all = std::all_of(scorers.begin(), scorers.end(),
                                     [&](const Scorer* s) { return s->score(x).predicted() == Label::malware; });
        if (all) detected.push_back(i);
    }
    Rng rng(ctx.seed);
    rng.shuffle(std::span<std::size_t>(detected));
    if (detected.size() > f.bases) detected.resize(f.bases);
    if (detected.empty()) fail(ErrorCode::invalid_argument, "no detected malware samples to attack");

    GaConfig ga;
    ga.population = f.population;
    ga.mutation_rate = f.mutation;
    ga.max_loop = f.max_loop;
    ga.seed = ctx.seed;

    std::vector<AttackResult> results(detected.size());
    parallel_for(detected.size(), ctx.workers, [&](std::size_t b) {
        const Sample& base = samples[detected[b]];
        const auto pool = build_candidate_pool(samples, base, pool_cfg);
        results[b] = generate(base, scorers, vocab, pool, ga);
    });

    std::string out = jsonl_preamble(ctx);
    std::vector<AdversarialCandidate> all;
    std::size_t evaded = 0;
    for (const auto& r : results) {
        out += json{{"type", "base"},
                    {"base_id", r.base_id},
                    {"generations", r.generations},
                    {"stop", std::string(to_string(r.reason))},
                    {"pool_size", r.pool_size},
                    {"candidates", r.candidates.size()}}
                   .dump() +
               "\n";
        evaded += r.candidates.empty() ? 0 : 1;
        all.insert(all.end(), r.candidates.begin(), r.candidates.end());
    }
    if (f.per_bin > 0) {
        const auto strat = stratify_by_score(all, f.per_bin, ctx.seed);
        for (const auto& w : strat.warnings) {
            spdlog::warn("score bin {} has {} candidates, {} requested", w.bin, w.available, w.requested);
            out += json{{"type", "warning"}, {"bin", w.bin}, {"available", w.available}, {"requested", w.requested}}
                       .dump() +
                   "\n";
        }
        all = strat.selected;
    }
    for (const auto& c : all) out += serialize_candidate(c) + "\n";
    write_output(f.out, out);
    spdlog::info("{} of {} bases evaded; {} candidates written", evaded, results.size(), all.size());
}

json ranked_json(const std::vector<double>& a, const FeatureVector& x, const Vocabulary& vocab, std::size_t top) {
    json out = json::array();
    for (const auto& r : rank_features(a, top)) {
        out.push_back({{"token", vocab.token(r.index).str()},
                       {"index", r.index},
                       {"attribution", r.attribution},
                       {"present", x.values[r.index] != 0.0}});
    }
    return out;
}

struct Explained {
    std::vector<double> attribution;
    json detail;
};

Explained explain_one(const FeatureVector& x, const TrainedModel& model, const ExplainerOptions& opts,
                      const std::string& dump_path, const Scorer* teacher) {
    Explained out;
    out.detail = json::object();
    switch (opts.method) {
        case ExplainMethod::mpt: {
            const auto set = perturb(x, opts.mpt.steps);
            RespondOptions ro;
            ro.workers = opts.mpt.workers;
            ro.base_scorer = teacher;
            const auto responses = respond(set, model, ro);
            const auto cov = covariance(responses, opts.mpt.lambda);
            const auto solved = solve_attribution(cov, opts.mpt.solver);
            if (!dump_path.empty()) write_perturbation_csv(set, responses, dump_path);
            out.attribution = solved.a;
            const auto& st = solved.stats;
            out.detail = {{"target", std::string(to_string(responses.target))},
                          {"base_score", responses.base_score},
                          {"objective", solved.objective},
                          {"lambda", cov.lambda},
                          {"solver",
                           {{"iterations", st.iterations},
                            {"equality_residual", st.equality_residual},
                            {"box_violation", st.box_violation},
                            {"stationarity", st.stationarity},
                            {"min_multiplier", st.min_multiplier},
                            {"nu", st.nu},
                            {"at_lower", st.at_lower},
                            {"at_upper", st.at_upper}}}};
            break;
        }
        case ExplainMethod::lime: {
            const auto r = explain_lime(x, model, opts.lime);
            out.attribution = r.values;
            out.detail = {{"target", std::string(to_string(r.target))},
                          {"base_score", model.score(x).of(r.target)},
                          {"intercept", r.intercept},
                          {"evaluations", r.evaluations}};
            break;
        }
        case ExplainMethod::kshap: {
            const auto r = explain_kernel_shap(x, model, opts.kshap);
            out.attribution = r.values;
            out.detail = {{"target", std::string(to_string(r.target))},
                          {"base_score", model.score(x).of(r.target)},
                          {"expected_value", r.intercept},
                          {"evaluations", r.evaluations}};
            break;
        }
    }
    out.detail["method"] = std::string(to_string(opts.method));
    return out;
}

struct ExplainCmdFlags {
    std::string model, teacher, corpus, sample_id, adv, out, plot, dump;
    std::size_t top = 20;
    ExplainFlags explain;
};

void run_explain(const ExplainCmdFlags& f, const Context& ctx) {
    if (f.sample_id.empty() == f.adv.empty()) {
        fail(ErrorCode::invalid_argument, "explain needs exactly one of --sample-id or --adv");
    }
    if (!f.adv.empty() && (!f.plot.empty() || !f.dump.empty())) {
        fail(ErrorCode::invalid_argument, "--plot and --dump-perturbations apply to a single --sample-id");
    }
    if (!f.dump.empty() && f.explain.method != "mpt") {
        fail(ErrorCode::invalid_argument, "--dump-perturbations applies to --method mpt");
    }
    if (!f.teacher.empty() && f.explain.method != "mpt") {
        fail(ErrorCode::invalid_argument, "--teacher applies to --method mpt");
    }
    const auto model = load_model_with_vocabulary(f.model);
    const auto& vocab = *model.vocabulary();
    std::optional<TrainedModel> teacher;
    if (!f.teacher.empty()) {
        teacher = load_model_with_vocabulary(f.teacher);
        if (teacher->vocabulary_fingerprint() != model.vocabulary_fingerprint()) {
            fail(ErrorCode::dimension_mismatch, "teacher and model use different vocabularies");
        }
    }
    const Scorer* base_scorer = teacher ? &*teacher : nullptr;
    const auto samples = load_corpus(f.corpus);

    if (!f.sample_id.empty()) {
        const auto& sample = find_sample(samples, f.sample_id);
        const auto x = embed(sample, vocab);
        const auto opts = explainer_options(f.explain, ctx.seed, ctx.workers);
        auto e = explain_one(x, model, opts, f.dump, base_scorer);
        json report = e.detail;
        report["sample_id"] = sample.id;
        report["label"] = std::string(to_string(sample.label));
        report["attributions"] = ranked_json(e.attribution, x, vocab, f.top);
        report["run_config"] = ctx.run_config;
        const auto text = report.dump(2) + "\n";
        std::string svg;
        if (!f.plot.empty()) {
            std::vector<Bar> bars;
            for (const auto& r : rank_features(e.attribution, f.top == 0 ? 20 : f.top)) {
                bars.push_back({vocab.token(r.index).str(), r.attribution});
            }
            svg = bar_chart_svg(std::string(to_string(opts.method)) + " attributions for " + sample.id, bars);
        }
        write_output(f.out, text);
        if (!svg.empty()) write_output(f.plot, svg);
        return;
    }

    const auto candidates = load_candidates(f.adv);
    // Sequential per candidate with inner parallelism off; candidates run concurrently.
    const auto opts = explainer_options(f.explain, ctx.seed, 1);
    std::vector<std::string> lines(candidates.size());
    parallel_for(candidates.size(), ctx.workers, [&](std::size_t i) {
        const auto& c = candidates[i];
        const auto adv = adversarial_sample(find_sample(samples, c.base_id), c.activated);
        const auto x = embed(adv, vocab);
        auto e = explain_one(x, model, opts, "", base_scorer);
        json record = e.detail;
        record["type"] = "explanation";
        record["candidate"] = i;
        record["base_id"] = c.base_id;
        record["benign_score"] = model.score(x).p_benign;
        record["activated"] = c.activated.size();
        record["activated_attribution"] = activated_attribution(c, vocab, e.attribution);
        record["attributions"] = ranked_json(e.attribution, x, vocab, f.top);
        lines[i] = record.dump() + "\n";
    });
    std::string out = jsonl_preamble(ctx);
    for (const auto& l : lines) out += l;
    write_output(f.out, out);
}

}  // namespace

void register_attack(CLI::App& root, Registry& registry) {
    auto f = std::make_shared<AttackFlags>();
    auto* a = root.add_subcommand("attack", "Genetic evasion attack on detected malware samples");
    a->add_option("--model", f->models, "Target model JSON; several comma separated, first gives fitness")
        ->required()
        ->delimiter(',');
    a->add_option("--corpus", f->corpus, "Training corpus JSONL (bases and candidate pool)")->required();
    a->add_option("--out", f->out, "Output JSONL")->required();
    a->add_option("--bases", f->bases, "Number of detected malware bases to attack");
    a->add_option("--category", f->category, "Category of activatable tokens");
    a->add_option("--source", f->source, "Pool source: benign|malware|any")
        ->check(CLI::IsMember({"benign", "malware", "any"}));
    a->add_option("--max-loop", f->max_loop, "Generation cap")->check(CLI::PositiveNumber);
    a->add_option("--population", f->population, "Solutions per generation")->check(CLI::Range(2, 100000));
    a->add_option("--mutation", f->mutation, "Per-gene mutation rate")->check(CLI::Range(0.0, 1.0));
    a->add_option("--per-bin", f->per_bin, "Stratify: candidates per benign-score bin (0 keeps all)");
    registry.push_back({a, [f](const Context& ctx) { run_attack(*f, ctx); }});
}

void register_explain(CLI::App& root, Registry& registry) {
    auto f = std::make_shared<ExplainCmdFlags>();
    auto* e = root.add_subcommand("explain", "Explain one sample or a batch of adversarial candidates");
    e->add_option("--model", f->model, "Model JSON")->required();
    e->add_option("--corpus", f->corpus, "Corpus JSONL")->required();
    e->add_option("--teacher", f->teacher, "Model that scores the unperturbed sample (mpt)");
    e->add_option("--sample-id", f->sample_id, "Sample to explain");
    e->add_option("--adv", f->adv, "Adversarial candidates JSONL (batch mode)");
    e->add_option("--out", f->out, "Report JSON (single) or JSONL (batch)")->required();
    e->add_option("--top", f->top, "Ranked attributions to report (0 = all)");
    e->add_option("--plot", f->plot, "SVG bar chart of the top attributions");
    e->add_option("--dump-perturbations", f->dump, "CSV of every perturbed score (mpt)");
    add_explain_flags(e, f->explain);
    registry.push_back({e, [f](const Context& ctx) { run_explain(*f, ctx); }});
}

}  // namespace mptx::cli
