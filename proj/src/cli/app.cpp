#include "mptx/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "cli/common.hpp"
#include "mptx/error.hpp"
#include "mptx/hash.hpp"

namespace mptx::cli {

void write_output(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
    out << content;
    out.close();
    if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::string csv_preamble(const Context& ctx) { return "# run_config=" + ctx.run_config.dump() + "\n"; }

std::string jsonl_preamble(const Context& ctx) {
    json record = ctx.run_config;
    record["type"] = "run_config";
    return record.dump() + "\n";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

TrainedModel load_model_with_vocabulary(const std::filesystem::path& path) {
    auto model = load_model(path);
    if (!model.vocabulary()) {
        fail(ErrorCode::parse, "model '" + path.string() + "' carries no vocabulary");
    }
    return model;
}

const Sample& find_sample(const std::vector<Sample>& samples, const std::string& id) {
    for (const auto& s : samples) {
        if (s.id == id) return s;
    }
    fail(ErrorCode::not_found, "sample '" + id + "' is not in the corpus");
}

void add_explain_flags(CLI::App* app, ExplainFlags& flags) {
    app->add_option("--method", flags.method, "Explanation method")->check(CLI::IsMember({"mpt", "lime", "kshap"}));
    app->add_option("--k", flags.k, "Perturbation steps per feature (mpt)")->check(CLI::Range(2, 100000));
    app->add_option("--lambda", flags.lambda, "Covariance ridge (mpt); default scales with the trace")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--lime-samples", flags.lime_samples, "Neighbour masks (lime)");
    app->add_option("--kernel-width", flags.kernel_width, "Kernel width (lime); default 0.75*sqrt(M)")
        ->check(CLI::PositiveNumber);
    app->add_option("--coalitions", flags.coalitions, "Coalition budget for sampled kernel SHAP");
}

ExplainerOptions explainer_options(const ExplainFlags& flags, std::uint64_t seed, std::size_t workers) {
    ExplainerOptions o;
    o.method = parse_explain_method(flags.method);
    o.mpt.steps = flags.k;
    o.mpt.lambda = flags.lambda;
    o.mpt.workers = workers;
    o.lime.num_samples = flags.lime_samples;
    o.lime.kernel_width = flags.kernel_width;
    o.lime.seed = seed;
    o.lime.workers = workers;
    o.kshap.num_coalitions = flags.coalitions;
    o.kshap.seed = seed;
    o.kshap.workers = workers;
    return o;
}

namespace {

json options_of(const CLI::App* app) {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt == app->get_help_ptr() || opt == app->get_help_all_ptr()) continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
        } else {
            value = opt->get_default_str();
        }
        out[opt->get_single_name()] = value;
    }
    return out;
}

json resolve_run_config(const CLI::App& root, const std::vector<const CLI::App*>& chain, std::uint64_t seed,
                        std::size_t workers) {
    std::string subcommand;
    json options = json::object();
    for (const CLI::App* app : chain) {
        subcommand += (subcommand.empty() ? "" : " ") + app->get_name();
        const json own = options_of(app);
        for (const auto& [k, v] : own.items()) options[k] = v;
    }
    json config{{"tool", "mpt-xplain"},
                {"subcommand", subcommand},
                {"seed", seed},
                {"workers", workers},
                {"global", options_of(&root)},
                {"options", options}};
    config["fingerprint"] = to_hex(Fnv1a().text(config.dump()).digest());
    return config;
}

std::string quote(const std::string& text) {
    std::string out = "\"";
    for (char c : text) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

int report_error(std::string_view code, const std::string& message, int exit_code) {
    std::cerr << "error code=" << code << " message=" << quote(message) << std::endl;
    return exit_code;
}

}  // namespace

}  // namespace mptx::cli

namespace mptx {

int run_cli(int argc, const char* const* argv) {
    using namespace mptx::cli;
    CLI::App app{"Perturbation-based explanations for malware classifiers", "mpt-xplain"};
    app.option_defaults()->always_capture_default();
    app.fallthrough();
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string log_level = "warn";
    app.add_option("--seed", seed, "Seed for every random draw");
    app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    Registry registry;
    register_corpus(app, registry);
    register_model(app, registry);
    register_attack(app, registry);
    register_explain(app, registry);
    register_evaluate(app, registry);
    register_fidelity(app, registry);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(to_string(ErrorCode::invalid_argument), e.what(),
                            static_cast<int>(ErrorCode::invalid_argument));
    }

    auto logger = std::make_shared<spdlog::logger>("mpt-xplain", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_level(spdlog::level::from_str(log_level));
    spdlog::set_default_logger(logger);

    try {
        for (const auto& command : registry) {
            if (!command.app->parsed()) continue;
            std::vector<const CLI::App*> chain;
            for (const CLI::App* a = command.app; a != nullptr && a != &app; a = a->get_parent()) {
                chain.insert(chain.begin(), a);
            }
            Context ctx{seed, workers, resolve_run_config(app, chain, seed, workers)};
            spdlog::info("running {} (config {})", ctx.run_config["subcommand"].get<std::string>(),
                         ctx.run_config["fingerprint"].get<std::string>());
            command.run(ctx);
            return 0;
        }
        return report_error(to_string(ErrorCode::invalid_argument), "no subcommand given",
                            static_cast<int>(ErrorCode::invalid_argument));
    } catch (const Error& e) {
        return report_error(to_string(e.code()), e.what(), static_cast<int>(e.code()));
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), 1);
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"mpt-xplain"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mptx
