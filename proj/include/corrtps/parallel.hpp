// parallel.hpp - deterministic chunked parallel loops.
//
// Chunk boundaries depend only on the range, never on the thread count, so
// per-chunk reductions merged in chunk order give bit-identical results on
// any machine.
#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace corrtps {

inline constexpr std::int64_t kParallelChunk = 1 << 14;

inline std::int64_t chunk_count(std::int64_t n, std::int64_t chunk = kParallelChunk) {
    return n <= 0 ? 0 : (n + chunk - 1) / chunk;
}

// fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
template <typename Fn>
void parallel_chunks(std::int64_t n, Fn&& fn, std::int64_t chunk = kParallelChunk) {
    const std::int64_t nchunks = chunk_count(n, chunk);
    if (nchunks == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const std::int64_t nthreads = std::min<std::int64_t>(hw, nchunks);
    if (nthreads <= 1) {
        for (std::int64_t c = 0; c < nchunks; ++c) {
            fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (std::int64_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::int64_t c = next.fetch_add(1);
                if (c >= nchunks) break;
                fn(c, c * chunk, std::min(n, (c + 1) * chunk));
            }
        });
    }
    for (auto& th : pool) th.join();
}

// Elementwise loop: fn(i) for i in [0, n).
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    parallel_chunks(n, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
}

// Deterministic parallel sum: per-chunk partials merged in chunk order.
template <typename Fn>
double parallel_sum(std::int64_t n, Fn&& term) {
    std::vector<double> partial(static_cast<std::size_t>(chunk_count(n)), 0.0);
    parallel_chunks(n, [&](std::int64_t c, std::int64_t lo, std::int64_t hi) {
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<std::size_t>(c)] = s;
    });
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

} // namespace corrtps
