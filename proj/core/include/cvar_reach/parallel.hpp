#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cvar_reach {

/// Number of workers for a request of `threads` (0 = hardware concurrency).
inline unsigned resolve_threads(unsigned threads) {
    if (threads != 0)
        return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Calls body(i) for i in [0, n) on up to `threads` workers with static
/// contiguous chunks. Bodies must only write to index-owned storage; the
/// first exception thrown by any body is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end)
            break;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i)
                    body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace cvar_reach
