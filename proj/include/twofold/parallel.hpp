#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace twofold {

/// Worker-thread count: TWOFOLD_THREADS if set, else available parallelism.
inline unsigned worker_count() {
    if (const char* env = std::getenv("TWOFOLD_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(i) for i in [0, n). Work is handed out in fixed-size chunks via an
/// atomic cursor; fn must write only to per-index slots so that results are
/// independent of the schedule. The first exception thrown wins.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0) {
    if (threads == 0) threads = worker_count();
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = std::max<std::size_t>(1, n / (threads * 8));
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            std::size_t begin = cursor.fetch_add(chunk);
            if (begin >= n || failed.load(std::memory_order_relaxed)) return;
            std::size_t end = std::min(begin + chunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace twofold
