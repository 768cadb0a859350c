#pragma once

#include <cstddef>
#include <functional>

namespace vpe {

// Global worker count. 0 means hardware concurrency.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Runs fn(begin, end) over fixed-boundary chunks of [0, n). Chunk boundaries
// depend only on n and num_chunks (never on the worker count), so any
// reduction done per chunk and combined in chunk order is reproducible across
// machines. num_chunks == 0 picks one chunk per worker.
void parallel_chunks(std::size_t n, std::size_t num_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Element-wise convenience: fn(i) for i in [0, n), each index handled by
// exactly one worker. Safe only when iterations write disjoint locations.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Fixed chunk count used by kernels that keep per-chunk gradient accumulators;
// a constant (rather than the worker count) keeps float reductions bit-stable.
inline constexpr std::size_t kGradChunks = 8;

}  // namespace vpe
