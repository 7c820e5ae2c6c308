#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cli/common.hpp"
#include "mptx/error.hpp"
#include "mptx/plot.hpp"
#include "mptx/random.hpp"

namespace mptx::cli {

namespace {

struct ExplanationSet {
    std::string method;
    std::vector<ExplainedCandidate> candidates;
};

ExplanationSet load_explanations(const std::string& adv_path, const std::string& explanations_path) {
    const auto adv = load_candidates(adv_path);
    std::ifstream in(explanations_path, std::ios::binary);
    if (!in) fail(ErrorCode::not_found, "cannot open explanations '" + explanations_path + "'");

    ExplanationSet out;
    std::vector<std::optional<ExplainedCandidate>> slots(adv.size());
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = explanations_path + " line " + std::to_string(line_number) + ": ";
        try {
            const json j = json::parse(line);
            if (j.value("type", "") != "explanation") continue;
            const auto i = j.at("candidate").get<std::size_t>();
            if (i >= adv.size() || j.at("base_id").get<std::string>() != adv[i].base_id) {
                fail(ErrorCode::invalid_argument, where + "explanation does not match the candidate file");
            }
            ExplainedCandidate c;
            c.benign_score = j.at("benign_score").get<double>();
            c.activated_attribution = j.at("activated_attribution").get<std::vector<double>>();
            if (c.activated_attribution.size() != adv[i].activated.size()) {
                fail(ErrorCode::dimension_mismatch, where + "activated attribution count differs from the candidate");
            }
            out.method = j.value("method", "");
            slots[i] = std::move(c);
        } catch (const json::exception& e) {
            fail(ErrorCode::parse, where + e.what());
        }
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i]) fail(ErrorCode::invalid_argument, "candidate " + std::to_string(i) + " has no explanation");
        out.candidates.push_back(std::move(*slots[i]));
    }
    return out;
}

struct GoodFlags {
    std::string adv, explanations, out, plot;
};

struct BinsFlags {
    std::string adv, explanations, out;
    double good_threshold = 0.4;
};

struct FidelityFlags {
    std::string mode = "deduction", model, corpus, out, plot;
    std::size_t max_n = 60;
    std::size_t samples = 100;
    ExplainFlags explain;
};

void run_fidelity(const FidelityFlags& f, const Context& ctx) {
    const auto model = load_model_with_vocabulary(f.model);
    const auto samples = load_corpus(f.corpus);
    auto data = embed_all(samples, *model.vocabulary());
    const auto mode = parse_fidelity_mode(f.mode);
    // Explainer runs single-threaded; samples are spread over the workers.
    const auto explainer = make_explainer(model, explainer_options(f.explain, ctx.seed, 1));

    auto cap = [&](std::vector<LabeledVector> v, std::uint64_t stream) {
        if (f.samples > 0 && v.size() > f.samples) {
            Rng rng = Rng(ctx.seed).split(stream);
            rng.shuffle(std::span<LabeledVector>(v));
            v.resize(f.samples);
        }
        return v;
    };

    FidelityCurve curve;
    if (mode == FidelityMode::deduction) {
        curve = deduction_test(cap(std::move(data), 1), model, explainer, f.max_n, ctx.workers);
    } else {
        std::vector<LabeledVector> malware, benign;
        for (auto& d : data) (d.label == Label::malware ? malware : benign).push_back(std::move(d));
        curve = augmentation_test(cap(std::move(malware), 2), benign, model, explainer, f.max_n, ctx.workers);
    }
    spdlog::info("{} samples explained, {} skipped as misclassified", curve.samples, curve.skipped);

    std::string csv = csv_preamble(ctx) + "n,pcr,method\n";
    Series series{f.explain.method, {}, {}};
    for (std::size_t p = 0; p < curve.n.size(); ++p) {
        csv += std::to_string(curve.n[p]) + "," + format_double(curve.pcr[p]) + "," + f.explain.method + "\n";
        series.x.push_back(static_cast<double>(curve.n[p]));
        series.y.push_back(curve.pcr[p]);
    }
    write_output(f.out, csv);
    if (!f.plot.empty()) {
        write_output(f.plot, line_chart_svg(std::string(to_string(mode)) + " test", "features manipulated (n)",
                                             "PCR", std::span<const Series>(&series, 1)));
    }
}

}  // namespace

void register_evaluate(CLI::App& root, Registry& registry) {
    auto* ev = root.add_subcommand("evaluate", "Score explanations of adversarial candidates");
    ev->require_subcommand(1);

    auto gf = std::make_shared<GoodFlags>();
    auto* g = ev->add_subcommand("good", "Good-explanation fraction per threshold");
    g->add_option("--adv", gf->adv, "Adversarial candidates JSONL")->required();
    g->add_option("--explanations", gf->explanations, "Batch explanations JSONL")->required();
    g->add_option("--out", gf->out, "CSV threshold,fraction")->required();
    g->add_option("--plot", gf->plot, "SVG line chart");
    registry.push_back({g, [gf](const Context& ctx) {
                            const auto set = load_explanations(gf->adv, gf->explanations);
                            const auto result = sweep_good_explanation(set.candidates);
                            std::string csv = csv_preamble(ctx) + "threshold,fraction\n";
                            Series series{set.method.empty() ? "explainer" : set.method, {}, {}};
                            for (std::size_t t = 0; t < result.thresholds.size(); ++t) {
                                csv += format_double(result.thresholds[t]) + "," +
                                       format_double(result.fractions[t]) + "\n";
                                series.x.push_back(result.thresholds[t]);
                                series.y.push_back(result.fractions[t]);
                            }
                            write_output(gf->out, csv);
                            if (!gf->plot.empty()) {
                                write_output(gf->plot,
                                             line_chart_svg("good explanations", "threshold", "fraction",
                                                            std::span<const Series>(&series, 1)));
                            }
                        }});

    auto bf = std::make_shared<BinsFlags>();
    auto* b = ev->add_subcommand("bins", "Good-explanation fraction by score and activation count");
    b->add_option("--adv", bf->adv, "Adversarial candidates JSONL")->required();
    b->add_option("--explanations", bf->explanations, "Batch explanations JSONL")->required();
    b->add_option("--out", bf->out, "CSV score_bin,count_bin,fraction")->required();
    b->add_option("--good-threshold", bf->good_threshold, "Good-explanation threshold")->check(CLI::Range(0.0, 1.0));
    registry.push_back({b, [bf](const Context& ctx) {
                            const auto set = load_explanations(bf->adv, bf->explanations);
                            const auto bins = functional_analysis(set.candidates, bf->good_threshold);
                            std::string csv = csv_preamble(ctx) + "score_bin,count_bin,fraction\n";
                            for (std::size_t s = 0; s < bins.score_bins.size(); ++s) {
                                for (std::size_t c = 0; c < bins.count_bins.size(); ++c) {
                                    const auto fr = bins.cells[s][c].fraction();
                                    csv += bins.score_bins[s].label() + "," + bins.count_bins[c].label() + "," +
                                           (fr ? format_double(*fr) : std::string("n/a")) + "\n";
                                }
                            }
                            write_output(bf->out, csv);
                        }});
}

void register_fidelity(CLI::App& root, Registry& registry) {
    auto f = std::make_shared<FidelityFlags>();
    auto* fi = root.add_subcommand("fidelity", "Deduction or augmentation fidelity curve");
    fi->add_option("--mode", f->mode, "deduction|augmentation")->check(CLI::IsMember({"deduction", "augmentation"}));
    fi->add_option("--model", f->model, "Model JSON")->required();
    fi->add_option("--corpus", f->corpus, "Corpus JSONL")->required();
    fi->add_option("--out", f->out, "CSV n,pcr,method")->required();
    fi->add_option("--plot", f->plot, "SVG line chart");
    fi->add_option("--max-n", f->max_n, "Largest number of manipulated features");
    fi->add_option("--samples", f->samples, "Explained samples, seeded subsample (0 = all)");
    add_explain_flags(fi, f->explain);
    registry.push_back({fi, [f](const Context& ctx) { run_fidelity(*f, ctx); }});
}

}  // namespace mptx::cli
