#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace affield {

/// Process-wide worker count used by the per-pixel loops. 1 means run inline.
void set_thread_count(int n);
int thread_count();

namespace detail {
// Set on worker threads so nested loops run inline.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is
/// visited exactly once and chunks write disjoint outputs, so results do not
/// depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, thread_count()));
    if (workers == 1 || n < 2 || detail::in_worker) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunks = std::min(workers, n);
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::exception_ptr> errors(chunks);
    auto run = [&](std::size_t c) {
        const bool outer = detail::in_worker;
        detail::in_worker = true;
        try {
            const std::size_t b = c * step;
            const std::size_t e = std::min(n, b + step);
            if (b < e) fn(b, e);
        } catch (...) {
            errors[c] = std::current_exception();
        }
        detail::in_worker = outer;
    };
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) pool.emplace_back(run, c);
    run(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace affield
