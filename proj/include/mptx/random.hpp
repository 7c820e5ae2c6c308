#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace mptx {

// Seeded generator with platform-independent draws. std::*_distribution is
// implementation-defined, so reproducible artifacts only use these helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n) {
        // Lemire's multiply-shift; bias is below 2^-64 * n.
        const unsigned __int128 product =
            static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
        return static_cast<std::size_t>(product >> 64);
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

    /// Derive an independent stream, e.g. one per base sample.
    Rng split(std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(engine_() >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        std::mt19937_64 child(seq);
        return Rng(child());
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mptx
