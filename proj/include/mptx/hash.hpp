#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace mptx {

/// 64-bit FNV-1a, used for vocabulary, model and run-config fingerprints.
class Fnv1a {
public:
    Fnv1a& bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& text(std::string_view s) {
        bytes(s.data(), s.size());
        return u64(s.size());
    }
    Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof v); }
    Fnv1a& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
    Fnv1a& f64s(std::span<const double> values) {
        u64(values.size());
        for (double v : values) {
            f64(v);
        }
        return *this;
    }

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);
std::uint64_t parse_hex(std::string_view text);

}  // namespace mptx
