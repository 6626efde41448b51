#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace pathrec {

inline constexpr size_t kChunkSize = 4096;

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(chunk_index, begin, end) over [0, n) in fixed-size chunks.
/// Chunks are claimed dynamically but keyed by index, so any per-chunk
/// partial results can be reduced in chunk order afterwards; the reduction
/// is then independent of the worker count.
template <class Body>
void parallel_chunks(size_t n, int workers, Body&& body) {
    const size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
    workers = resolve_workers(workers);
    if (workers <= 1 || n_chunks <= 1) {
        for (size_t c = 0; c < n_chunks; ++c) {
            const size_t b = c * kChunkSize;
            const size_t e = std::min(n, b + kChunkSize);
            body(c, b, e);
        }
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) return;
            const size_t b = c * kChunkSize;
            const size_t e = std::min(n, b + kChunkSize);
            body(c, b, e);
        }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<size_t>(static_cast<size_t>(workers), n_chunks));
    pool.reserve(static_cast<size_t>(spawn));
    for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace pathrec
