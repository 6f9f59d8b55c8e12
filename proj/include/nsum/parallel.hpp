#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nsum {

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs f(i) for i in [0, n). Callers write results by index, so the outcome
// does not depend on the thread count. If several calls throw, the exception
// from the smallest index wins.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    threads = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errs(threads);
    std::vector<std::size_t> err_at(threads, n);
    auto work = [&](unsigned t) {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                if (i < err_at[t]) {
                    err_at[t] = i;
                    errs[t] = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work, t);
    work(0);
    for (auto& th : pool) th.join();
    std::size_t best = n;
    std::exception_ptr first;
    for (unsigned t = 0; t < threads; ++t)
        if (errs[t] && err_at[t] < best) {
            best = err_at[t];
            first = errs[t];
        }
    if (first) std::rethrow_exception(first);
}

}  // namespace nsum
