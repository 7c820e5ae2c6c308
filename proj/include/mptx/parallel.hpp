#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mptx {

/// Runs fn(begin, end) over [0, n) in chunks of `chunk` items on up to
/// `workers` threads. Chunks are claimed dynamically, so callers must write
/// results by index. The first exception thrown by any chunk is rethrown.
template <typename Fn>
void parallel_for_chunks(std::size_t n, std::size_t workers, std::size_t chunk, Fn&& fn) {
    if (n == 0) {
        return;
    }
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t chunks = (n + chunk - 1) / chunk;
    workers = std::clamp<std::size_t>(workers, 1, chunks);
    if (workers == 1) {
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            fn(begin, std::min(n, begin + chunk));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) {
                return;
            }
            try {
                fn(c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(chunks);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back(run);
        }
        run();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    const std::size_t chunk = std::max<std::size_t>(1, n / (std::max<std::size_t>(workers, 1) * 8));
    parallel_for_chunks(n, workers, chunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            fn(i);
        }
    });
}

}  // namespace mptx
