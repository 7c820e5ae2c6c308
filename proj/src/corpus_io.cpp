#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mptx/corpus.hpp"
#include "mptx/error.hpp"

namespace mptx {

using nlohmann::json;

namespace {

Sample parse_line(std::string_view line, std::size_t line_number) {
    const auto where = "line " + std::to_string(line_number) + ": ";
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::parse, where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) {
        fail(ErrorCode::parse, where + "expected a JSON object");
    }
    auto field = [&](const char* name) -> const json& {
        auto it = obj.find(name);
        if (it == obj.end()) {
            fail(ErrorCode::parse, where + "missing field '" + name + "'");
        }
        return *it;
    };

    Sample sample;
    const auto& id = field("id");
    const auto& label = field("label");
    const auto& features = field("features");
    if (!id.is_string() || !label.is_string() || !features.is_array()) {
        fail(ErrorCode::parse, where + "fields id/label must be strings and features an array");
    }
    sample.id = id.get<std::string>();
    if (sample.id.empty()) {
        fail(ErrorCode::parse, where + "empty id");
    }
    try {
        sample.label = parse_label(label.get<std::string>());
        if (auto it = obj.find("family"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) {
                fail(ErrorCode::parse, "family must be a string");
            }
            sample.family = it->get<std::string>();
        }
        sample.tokens.reserve(features.size());
        for (const auto& f : features) {
            if (!f.is_string()) {
                fail(ErrorCode::parse, "features must be strings");
            }
            sample.tokens.push_back(parse_token(f.get<std::string>()));
        }
    } catch (const Error& e) {
        fail(e.code(), where + e.what());
    }
    if (sample.tokens.empty()) {
        fail(ErrorCode::parse, where + "sample '" + sample.id + "' has no features");
    }
    return sample;
}

}  // namespace

std::vector<Sample> parse_corpus(std::string_view text) {
    std::vector<Sample> samples;
    std::unordered_set<std::string> ids;
    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_number;
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        auto sample = parse_line(line, line_number);
        if (!ids.insert(sample.id).second) {
            fail(ErrorCode::parse,
                 "line " + std::to_string(line_number) + ": duplicate id '" + sample.id + "'");
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<Sample> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::not_found, "cannot open corpus '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_corpus(buffer.str());
}

std::string serialize_corpus(std::span<const Sample> samples) {
    std::string out;
    for (const auto& sample : samples) {
        json obj;
        obj["id"] = sample.id;
        obj["label"] = std::string(to_string(sample.label));
        if (sample.family) {
            obj["family"] = *sample.family;
        }
        auto& features = obj["features"] = json::array();
        for (const auto& token : sample.tokens) {
            features.push_back(token.str());
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(std::span<const Sample> samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::io, "cannot write corpus '" + path.string() + "'");
    }
    out << serialize_corpus(samples);
    if (!out) {
        fail(ErrorCode::io, "write failed for '" + path.string() + "'");
    }
}

}  // namespace mptx
