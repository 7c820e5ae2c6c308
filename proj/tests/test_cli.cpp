#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "mptx/adversarial.hpp"
#include "mptx/cli.hpp"
#include "mptx/error.hpp"
#include "mptx/models.hpp"

using namespace mptx;
using nlohmann::json;
using testing::lines;
using testing::slurp;

namespace {

int cli(std::vector<std::string> args) { return run_cli(args); }

// Small corpus and model shared by the pipeline cases.
struct Workspace {
    testing::TempDir dir{"cli"};
    std::string corpus = (dir / "corpus.jsonl").string();
    std::string model = (dir / "model.json").string();

    Workspace() {
        REQUIRE(cli({"--seed", "7", "corpus", "gen", "--out", corpus, "--malware", "150", "--benign", "150", "--vocab",
                     "120", "--signal", "8", "--noise", "0.05"}) == 0);
        REQUIRE(cli({"--seed", "1", "model", "train", "--corpus", corpus, "--out", model, "--report",
                     (dir / "train.json").string()}) == 0);
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

json first_line_json(const std::string& path) { return json::parse(lines(slurp(path)).at(0)); }

}  // namespace

TEST_CASE("corpus gen is deterministic for a seed") {
    testing::TempDir dir("cli_gen");
    const auto a = (dir / "a.jsonl").string();
    const auto b = (dir / "b.jsonl").string();
    const auto c = (dir / "c.jsonl").string();
    CHECK(cli({"--seed", "7", "corpus", "gen", "--out", a, "--malware", "40", "--benign", "40", "--vocab", "60"}) == 0);
    CHECK(cli({"--seed", "7", "corpus", "gen", "--out", b, "--malware", "40", "--benign", "40", "--vocab", "60"}) == 0);
    CHECK(cli({"--seed", "8", "corpus", "gen", "--out", c, "--malware", "40", "--benign", "40", "--vocab", "60"}) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));
    CHECK(load_corpus(a).size() == 80);

    const auto stats = (dir / "stats.json").string();
    CHECK(cli({"corpus", "stats", a, "--out", stats}) == 0);
    const auto j = json::parse(slurp(stats));
    CHECK(j.at("samples") == 80);
    CHECK(j.at("run_config").at("subcommand") == "corpus stats");
}

TEST_CASE("argument and input errors map to distinct exit codes") {
    testing::TempDir dir("cli_errors");
    CHECK(cli({"corpus", "gen", "--bogus"}) == static_cast<int>(ErrorCode::invalid_argument));
    CHECK(cli({}) == static_cast<int>(ErrorCode::invalid_argument));
    CHECK(cli({"corpus", "stats", (dir / "missing.jsonl").string()}) == static_cast<int>(ErrorCode::not_found));
    {
        std::ofstream bad(dir / "bad.jsonl");
        bad << "{\"id\":1}\n";
    }
    CHECK(cli({"corpus", "stats", (dir / "bad.jsonl").string()}) == static_cast<int>(ErrorCode::parse));
    CHECK(cli({"model", "eval", "--model", (dir / "none.json").string(), "--corpus", (dir / "bad.jsonl").string()}) ==
          static_cast<int>(ErrorCode::not_found));
}

TEST_CASE("train, eval, explain and the not-found path") {
    Workspace ws;
    const auto train_report = json::parse(slurp(ws.path("train.json")));
    CHECK(train_report.at("holdout").at("mcc").get<double>() > 0.9);
    CHECK(train_report.at("run_config").at("seed") == 1);

    const auto model = load_model(ws.model);
    REQUIRE(model.vocabulary().has_value());

    CHECK(cli({"model", "eval", "--model", ws.model, "--corpus", ws.corpus, "--out", ws.path("eval.json")}) == 0);
    const auto eval = json::parse(slurp(ws.path("eval.json")));
    CHECK(eval.dump().find("\"mcc\"") != std::string::npos);

    const auto samples = load_corpus(ws.corpus);
    std::string malware_id;
    for (const auto& s : samples) {
        if (s.label == Label::malware && model.score(embed(s, *model.vocabulary())).predicted() == Label::malware) {
            malware_id = s.id;
            break;
        }
    }
    REQUIRE_FALSE(malware_id.empty());
    for (const char* method : {"mpt", "lime", "kshap"}) {
        const auto out = ws.path(std::string("explain_") + method + ".json");
        const auto svg = ws.path(std::string("explain_") + method + ".svg");
        REQUIRE(cli({"explain", "--model", ws.model, "--corpus", ws.corpus, "--sample-id", malware_id, "--method",
                     method, "--top", "5", "--out", out, "--plot", svg, "--coalitions", "256"}) == 0);
        const auto report = json::parse(slurp(out));
        CHECK(report.at("method") == method);
        CHECK(report.at("attributions").size() == 5);
        CHECK(report.at("sample_id") == malware_id);
        CHECK(slurp(svg).find("<svg") != std::string::npos);
    }
    const auto mpt = json::parse(slurp(ws.path("explain_mpt.json")));
    CHECK(mpt.contains("objective"));
    CHECK(mpt.at("solver").at("equality_residual").get<double>() <= 1e-8);

    const auto dump = ws.path("perturbations.csv");
    REQUIRE(cli({"explain", "--model", ws.model, "--corpus", ws.corpus, "--sample-id", malware_id, "--k", "5", "--out",
                 ws.path("d.json"), "--dump-perturbations", dump}) == 0);
    CHECK(lines(slurp(dump)).size() == 1 + 5 * model.dimension());

    const auto missing = ws.path("missing.json");
    CHECK(cli({"explain", "--model", ws.model, "--corpus", ws.corpus, "--sample-id", "no-such-sample", "--out",
               missing}) == static_cast<int>(ErrorCode::not_found));
    CHECK_FALSE(std::filesystem::exists(missing));
}

TEST_CASE("attack, batch explanations and evaluation reports") {
    Workspace ws;
    const auto corpus_before = slurp(ws.corpus);
    const auto adv = ws.path("adv.jsonl");
    REQUIRE(cli({"--seed", "3", "--workers", "2", "attack", "--model", ws.model, "--corpus", ws.corpus, "--bases", "4",
                 "--max-loop", "60", "--out", adv}) == 0);
    CHECK(slurp(ws.corpus) == corpus_before);
    const auto header = first_line_json(adv);
    CHECK(header.at("type") == "run_config");
    CHECK(header.at("subcommand") == "attack");
    const auto candidates = load_candidates(adv);
    REQUIRE_FALSE(candidates.empty());
    const auto model = load_model(ws.model);
    const auto samples = load_corpus(ws.corpus);
    for (const auto& c : candidates) {
        const Sample* base = nullptr;
        for (const auto& s : samples) base = s.id == c.base_id ? &s : base;
        REQUIRE(base != nullptr);
        const auto x = embed(adversarial_sample(*base, c.activated), *model.vocabulary());
        CHECK(model.score(x).p_benign > 0.5);
        CHECK(model.score(x).p_benign == c.benign_scores.at(0));
    }

    // Same seed, same bytes.
    const auto adv2 = ws.path("adv2.jsonl");
    REQUIRE(cli({"--seed", "3", "--workers", "1", "attack", "--model", ws.model, "--corpus", ws.corpus, "--bases", "4",
                 "--max-loop", "60", "--out", adv2}) == 0);
    auto strip_config = [](const std::string& text) { return text.substr(text.find('\n') + 1); };
    CHECK(strip_config(slurp(adv)) == strip_config(slurp(adv2)));

    for (const char* method : {"mpt", "lime"}) {
        const auto ex = ws.path(std::string("ex_") + method + ".jsonl");
        REQUIRE(cli({"--workers", "2", "explain", "--model", ws.model, "--corpus", ws.corpus, "--adv", adv, "--method",
                     method, "--k", "10", "--out", ex}) == 0);
        const auto rows = lines(slurp(ex));
        CHECK(rows.size() == candidates.size() + 1);

        const auto good = ws.path(std::string("good_") + method + ".csv");
        REQUIRE(cli({"evaluate", "good", "--adv", adv, "--explanations", ex, "--out", good, "--plot",
                     ws.path("good.svg")}) == 0);
        const auto good_rows = lines(slurp(good));
        REQUIRE(good_rows.size() == 12);
        CHECK(good_rows[0].rfind("# run_config=", 0) == 0);
        CHECK(good_rows[1] == "threshold,fraction");

        const auto bins = ws.path(std::string("bins_") + method + ".csv");
        REQUIRE(cli({"evaluate", "bins", "--adv", adv, "--explanations", ex, "--out", bins}) == 0);
        const auto bin_rows = lines(slurp(bins));
        CHECK(bin_rows.size() == 2 + 15);
        CHECK(bin_rows[1] == "score_bin,count_bin,fraction");
    }
}

TEST_CASE("fidelity writes an n,pcr,method curve") {
    testing::TempDir dir("cli_fidelity");
    const auto corpus = (dir / "c.jsonl").string();
    const auto model = (dir / "m.json").string();
    const auto out = (dir / "f.csv").string();
    REQUIRE(cli({"corpus", "gen", "--out", corpus, "--malware", "60", "--benign", "60", "--vocab", "40"}) == 0);
    REQUIRE(cli({"model", "train", "--corpus", corpus, "--out", model, "--encoding", "binary", "--report",
                 (dir / "r.json").string()}) == 0);
    REQUIRE(cli({"fidelity", "--mode", "deduction", "--model", model, "--corpus", corpus, "--method", "kshap",
                 "--max-n", "5", "--samples", "10", "--out", out, "--plot", (dir / "f.svg").string()}) == 0);
    const auto rows = lines(slurp(out));
    REQUIRE(rows.size() == 2 + 6);
    CHECK(rows[1] == "n,pcr,method");
    CHECK(rows[2] == "0,1,kshap");
}
