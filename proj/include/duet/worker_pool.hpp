#ifndef DUET_WORKER_POOL_HPP
#define DUET_WORKER_POOL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace duet {

/// Runs fn(i) exactly once for each i in [0, n) on at most `workers` threads.
/// fn must confine its writes to per-index state; results keyed by index make
/// the outcome independent of worker count and scheduling. The first
/// exception stops remaining work and is rethrown on the calling thread.
template <typename Fn>
void parallel_for_indexed(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    const std::size_t thread_count =
        std::min(n, static_cast<std::size_t>(workers < 1 ? 1 : workers));
    if (thread_count <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(body);
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace duet

#endif // DUET_WORKER_POOL_HPP
