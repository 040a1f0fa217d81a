#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace heatls {

/// Worker count resolution: explicit argument > HEATLS_THREADS env > 1.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HEATLS_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

/// Chunked parallel loop over [0, n). Chunk boundaries are fixed (independent
/// of the worker count) so per-chunk partial results can be merged in chunk
/// order, giving bit-identical reductions at any thread count.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t chunk, const Body& body, int threads = 0) {
    if (n == 0) return;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const int nw = resolve_threads(threads);
    if (nw <= 1 || nchunks == 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            body(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            body(c, c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::thread> pool;
    const int spawn = std::min<std::size_t>(nw, nchunks);
    pool.reserve(spawn > 0 ? spawn - 1 : 0);
    for (int i = 1; i < spawn; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace heatls
