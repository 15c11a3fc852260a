#pragma once

// Deterministic fork-join helpers. Work is split into fixed-size blocks whose
// boundaries never depend on the thread count, and partial results are merged
// in block order, so every reduction is bit-identical for any MFBSDE_THREADS.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mfbsde {

namespace detail {
inline int& thread_override() {
    static thread_local int value = 0;
    return value;
}
inline bool& inside_worker() {
    static thread_local bool value = false;
    return value;
}
} // namespace detail

inline unsigned thread_count() {
    if (detail::thread_override() > 0) return static_cast<unsigned>(detail::thread_override());
    if (const char* env = std::getenv("MFBSDE_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(std::min<long>(v, 1024));
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

// Pins the calling thread's parallel width until destruction.
class ScopedThreads {
public:
    explicit ScopedThreads(int n) : saved_(detail::thread_override()) { detail::thread_override() = n; }
    ~ScopedThreads() { detail::thread_override() = saved_; }
    ScopedThreads(const ScopedThreads&) = delete;
    ScopedThreads& operator=(const ScopedThreads&) = delete;

private:
    int saved_;
};

inline constexpr std::size_t kBlock = 1024;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlock) {
    return (n + block - 1) / block;
}

// Calls body(b, begin, end) for every block b of [0, n).
template <class Body>
void for_blocks(std::size_t n, Body&& body, std::size_t block = kBlock) {
    const std::size_t nb = block_count(n, block);
    if (nb == 0) return;
    const unsigned want = detail::inside_worker() ? 1u : thread_count();
    const std::size_t workers = std::min<std::size_t>(want, nb);
    auto run = [&](std::size_t b) {
        const std::size_t lo = b * block;
        body(b, lo, std::min(n, lo + block));
    };
    if (workers <= 1) {
        for (std::size_t b = 0; b < nb; ++b) run(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        detail::inside_worker() = true;
        for (;;) {
            std::size_t b = next.fetch_add(1);
            if (b >= nb) break;
            try {
                run(b);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(nb);
            }
        }
        detail::inside_worker() = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t block = kBlock) {
    for_blocks(
        n, [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        },
        block);
}

// Ordered reduction: partial(lo, hi) -> T per block, merged left to right.
template <class T, class Partial, class Merge>
T block_reduce(std::size_t n, T init, Partial&& partial, Merge&& merge, std::size_t block = kBlock) {
    std::vector<T> parts(block_count(n, block), init);
    for_blocks(
        n, [&](std::size_t b, std::size_t lo, std::size_t hi) { parts[b] = partial(lo, hi); }, block);
    T acc = init;
    for (auto& p : parts) acc = merge(std::move(acc), p);
    return acc;
}

template <class F>
double block_sum(std::size_t n, F&& term) {
    return block_reduce<double>(
        n, 0.0,
        [&](std::size_t lo, std::size_t hi) {
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += term(i);
            return s;
        },
        [](double a, double b) { return a + b; });
}

} // namespace mfbsde
