#pragma once

// Small shared-nothing parallel loop. PHOTONLAB_THREADS caps the worker
// count; unset or invalid falls back to the hardware thread count.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "common.hpp"

namespace photonlab {

inline unsigned max_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("PHOTONLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        // an explicit setting wins, even above the hardware count
        if (end != env && *end == '\0' && v >= 1 && v <= 4096) return unsigned(v);
    }
    return hw;
}

// fn(i) is called once for each i in [0, n), from up to max_threads() workers.
// The first exception wins and is rethrown on the calling thread after all
// workers drain.
template <typename Fn>
inline void parallel_for(size_t n, Fn&& fn) {
    const unsigned nt = max_threads();
    if (n == 0) return;
    if (nt <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mu;

    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    const unsigned workers = unsigned(n < nt ? n : nt);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace photonlab
