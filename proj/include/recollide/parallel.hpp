#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace recollide::parallel {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs per_chunk(0..n_chunks-1) on a worker pool and folds the results in
// chunk order: combine(acc, result_i) for i = 0, 1, ... regardless of which
// worker produced which chunk. With chunk-indexed RNG substreams this makes
// every estimate independent of the thread count.
template <class Result, class PerChunk, class Combine>
Result run_chunked(std::uint64_t n_chunks, int threads, PerChunk per_chunk, Combine combine) {
    threads = resolve_threads(threads);
    std::vector<Result> results(n_chunks);
    if (threads <= 1 || n_chunks <= 1) {
        for (std::uint64_t i = 0; i < n_chunks; ++i) results[i] = per_chunk(i);
    } else {
        std::atomic<std::uint64_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::uint64_t i = next.fetch_add(1);
                if (i >= n_chunks) return;
                results[i] = per_chunk(i);
            }
        };
        std::vector<std::thread> pool;
        int n_workers = static_cast<int>(std::min<std::uint64_t>(
            static_cast<std::uint64_t>(threads), n_chunks));
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    Result acc{};
    for (std::uint64_t i = 0; i < n_chunks; ++i) combine(acc, results[i]);
    return acc;
}

}  // namespace recollide::parallel
