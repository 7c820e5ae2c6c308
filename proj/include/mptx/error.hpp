#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mptx {

/// Failure classes. The CLI maps each one to a distinct process exit code.
enum class ErrorCode {
    invalid_argument = 2,
    not_found = 3,
    parse = 4,
    dimension_mismatch = 5,
    io = 6,
    numerical = 7,
    version_mismatch = 8,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace mptx
