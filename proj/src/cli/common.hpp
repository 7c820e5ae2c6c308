#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mptx/baselines.hpp"
#include "mptx/corpus.hpp"
#include "mptx/evaluation.hpp"
#include "mptx/models.hpp"

namespace mptx::cli {

using nlohmann::json;

struct Context {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    json run_config;  // resolved flags of the invoked subcommand chain
};

struct Command {
    CLI::App* app = nullptr;
    std::function<void(const Context&)> run;
};

using Registry = std::vector<Command>;

void register_corpus(CLI::App& root, Registry& registry);
void register_model(CLI::App& root, Registry& registry);
void register_attack(CLI::App& root, Registry& registry);
void register_explain(CLI::App& root, Registry& registry);
void register_evaluate(CLI::App& root, Registry& registry);
void register_fidelity(CLI::App& root, Registry& registry);

/// Writes the whole file in one go; called only after all work succeeded.
void write_output(const std::filesystem::path& path, const std::string& content);

/// "# run_config=<json>\n"
std::string csv_preamble(const Context& ctx);
/// {"type":"run_config", ...} as one JSONL line (with trailing newline).
std::string jsonl_preamble(const Context& ctx);

std::string format_double(double v);

/// Loads a model and requires an embedded vocabulary.
TrainedModel load_model_with_vocabulary(const std::filesystem::path& path);
const Sample& find_sample(const std::vector<Sample>& samples, const std::string& id);

struct ExplainFlags {
    std::string method = "mpt";
    std::size_t k = 50;
    std::optional<double> lambda;
    std::size_t lime_samples = 1000;
    std::optional<double> kernel_width;
    std::size_t coalitions = 2048;
};

void add_explain_flags(CLI::App* app, ExplainFlags& flags);
ExplainerOptions explainer_options(const ExplainFlags& flags, std::uint64_t seed, std::size_t workers);

}  // namespace mptx::cli
