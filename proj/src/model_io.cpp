#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mptx/error.hpp"
#include "mptx/hash.hpp"
#include "mptx/models.hpp"

namespace mptx {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "mptx-model";

json vocabulary_to_json(const Vocabulary& vocab) {
    json tokens = json::array();
    for (const auto& t : vocab.tokens()) {
        tokens.push_back(t.str());
    }
    return json{{"encoding", std::string(to_string(vocab.encoding()))},
                {"corpus_size", vocab.corpus_size()},
                {"tokens", std::move(tokens)},
                {"document_frequency", vocab.document_frequency()},
                {"fingerprint", to_hex(vocab.fingerprint())}};
}

Vocabulary vocabulary_from_json(const json& j) {
    std::vector<FeatureToken> tokens;
    for (const auto& t : j.at("tokens")) {
        tokens.push_back(parse_token(t.get<std::string>()));
    }
    Vocabulary vocab(std::move(tokens), j.at("document_frequency").get<std::vector<std::size_t>>(),
                     j.at("corpus_size").get<std::size_t>(),
                     parse_encoding(j.at("encoding").get<std::string>()));
    if (to_hex(vocab.fingerprint()) != j.at("fingerprint").get<std::string>()) {
        fail(ErrorCode::parse, "model vocabulary fingerprint does not match its contents");
    }
    return vocab;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
    json j;
    j["format"] = kFormat;
    j["version"] = kModelFormatVersion;
    j["kind"] = std::string(to_string(model.kind()));
    j["dimension"] = model.dimension();
    j["vocabulary_fingerprint"] = to_hex(model.vocabulary_fingerprint());
    j["fingerprint"] = to_hex(model.fingerprint());
    j["hyperparameters"] = {{"c", model.hyperparameters().c}, {"gamma", model.hyperparameters().gamma}};
    j["calibration"] = {{"slope", model.calibration().slope}, {"offset", model.calibration().offset}};
    j["bias"] = model.bias();
    if (model.kind() == ModelKind::linear_svm) {
        j["weights"] = model.weights();
    } else {
        json support = json::array();
        for (std::size_t s = 0; s < model.support_size(); ++s) {
            // Sparse rows: [[index, value], ...]
            json row = json::array();
            const auto sv = model.support_vector(s);
            for (std::size_t i = 0; i < sv.size(); ++i) {
                if (sv[i] != 0.0) {
                    row.push_back(json::array({i, sv[i]}));
                }
            }
            support.push_back(std::move(row));
        }
        j["support"] = std::move(support);
        j["coefficients"] = model.coefficients();
    }
    if (const auto& s = model.surrogate()) {
        j["surrogate"] = {{"teacher_kind", s->teacher_kind},
                          {"teacher_fingerprint", to_hex(s->teacher_fingerprint)},
                          {"agreement", s->agreement},
                          {"holdout", s->holdout}};
    }
    if (const auto& v = model.vocabulary()) {
        j["vocabulary"] = vocabulary_to_json(*v);
    }
    return j.dump(1);
}

TrainedModel parse_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse, std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != kFormat) {
            fail(ErrorCode::parse, "not an mptx model file");
        }
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            fail(ErrorCode::version_mismatch, "model file version " + std::to_string(version) +
                                                  " is not supported (expected version " +
                                                  std::to_string(kModelFormatVersion) + ")");
        }
        const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
        const std::size_t dimension = j.at("dimension").get<std::size_t>();
        const Hyperparameters hyper{j.at("hyperparameters").at("c").get<double>(),
                                    j.at("hyperparameters").at("gamma").get<double>()};
        const Calibration cal{j.at("calibration").at("slope").get<double>(),
                              j.at("calibration").at("offset").get<double>()};
        const std::uint64_t vocab_fp = parse_hex(j.at("vocabulary_fingerprint").get<std::string>());
        const double bias = j.at("bias").get<double>();

        std::optional<TrainedModel> model;
        if (kind == ModelKind::linear_svm) {
            auto weights = j.at("weights").get<std::vector<double>>();
            if (weights.size() != dimension) {
                fail(ErrorCode::parse, "model weights do not match the declared dimension");
            }
            model = TrainedModel::make_linear(std::move(weights), bias, hyper, cal, vocab_fp);
        } else {
            std::vector<std::vector<double>> support;
            for (const auto& row : j.at("support")) {
                std::vector<double> dense(dimension, 0.0);
                for (const auto& entry : row) {
                    const auto i = entry.at(0).get<std::size_t>();
                    if (i >= dimension) {
                        fail(ErrorCode::parse, "support vector index out of range");
                    }
                    dense[i] = entry.at(1).get<double>();
                }
                support.push_back(std::move(dense));
            }
            model = TrainedModel::make_rbf(std::move(support),
                                           j.at("coefficients").get<std::vector<double>>(), bias,
                                           hyper, cal, vocab_fp);
        }
        if (to_hex(model->fingerprint()) != j.at("fingerprint").get<std::string>()) {
            fail(ErrorCode::parse, "model fingerprint does not match its parameters");
        }
        if (auto it = j.find("surrogate"); it != j.end()) {
            model->set_surrogate(SurrogateInfo{it->at("teacher_kind").get<std::string>(),
                                               parse_hex(it->at("teacher_fingerprint").get<std::string>()),
                                               it->at("agreement").get<double>(),
                                               it->at("holdout").get<std::size_t>()});
        }
        if (auto it = j.find("vocabulary"); it != j.end()) {
            model->attach_vocabulary(vocabulary_from_json(*it));
        }
        return std::move(*model);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("malformed model file: ") + e.what());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::io, "cannot write model '" + path.string() + "'");
    }
    out << serialize_model(model) << '\n';
    if (!out) {
        fail(ErrorCode::io, "write failed for '" + path.string() + "'");
    }
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::not_found, "cannot open model '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str());
}

}  // namespace mptx
