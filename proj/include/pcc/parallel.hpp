#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pcc {

// Worker count for the data-parallel kernels.  Resolution order:
// set_thread_count() > PCC_THREADS env var > hardware concurrency.
// Every kernel assigns each output element a fixed summation order, so
// results are bit-identical for any worker count.
namespace detail {
inline unsigned& thread_count_ref() {
    static unsigned count = [] {
        if (const char* env = std::getenv("PCC_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<unsigned>(v);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1u;
    }();
    return count;
}
}  // namespace detail

inline unsigned thread_count() { return detail::thread_count_ref(); }

inline void set_thread_count(unsigned n) {
    detail::thread_count_ref() = n ? n : 1;
}

namespace detail {
inline thread_local bool inside_parallel = false;
}

// Runs fn(begin, end) over disjoint chunks of [0, n).  Chunks are handed
// out dynamically; writes must target disjoint locations per index.
// Nested calls degrade to serial execution instead of oversubscribing.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t grain, Fn&& fn,
                  unsigned workers = 0) {
    if (workers == 0) workers = thread_count();
    if (n == 0) return;
    if (grain == 0) grain = 1;
    const std::size_t chunks = (n + grain - 1) / grain;
    if (detail::inside_parallel || workers <= 1 || chunks <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    if (workers > chunks) workers = static_cast<unsigned>(chunks);

    std::atomic<std::size_t> next{0};
    auto run = [&] {
        detail::inside_parallel = true;
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) break;
            const std::size_t lo = c * grain;
            const std::size_t hi = lo + grain < n ? lo + grain : n;
            fn(lo, hi);
        }
        detail::inside_parallel = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

}  // namespace pcc
