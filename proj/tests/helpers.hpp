#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mptx/corpus.hpp"
#include "mptx/random.hpp"

namespace testing {

inline mptx::Sample sample(std::string id, mptx::Label label, std::initializer_list<const char*> tokens) {
    mptx::Sample s;
    s.id = std::move(id);
    s.label = label;
    for (const char* t : tokens) s.tokens.push_back(mptx::parse_token(t));
    return s;
}

inline mptx::FeatureVector vec(std::vector<double> values) {
    mptx::FeatureVector x;
    x.values = std::move(values);
    return x;
}

// Fresh directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) : path_(std::filesystem::current_path() / ("tmp_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& file) const { return path_ / file; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

// Random symmetric positive definite matrix B B^T + shift I.
inline Eigen::MatrixXd random_pd(mptx::Rng& rng, int m, double shift = 0.05) {
    Eigen::MatrixXd b(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) b(i, j) = 2.0 * rng.uniform() - 1.0;
    }
    Eigen::MatrixXd q = b * b.transpose();
    q.diagonal().array() += shift;
    return q;
}

}  // namespace testing
