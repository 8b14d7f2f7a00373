#ifndef IR2VIS_PARALLEL_HPP
#define IR2VIS_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace ir2vis {

/// Number of workers the pool uses, honoring the IR2VIS_THREADS env var.
int worker_count();

/// Runs fn(begin, end) over disjoint chunks of [begin, end) on the shared
/// pool. Falls back to a single serial call when the range is small, the
/// pool has one worker, or the caller is itself a pool worker (no nesting).
/// Chunks are disjoint, so writes to per-index data stay deterministic.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn);

}  // namespace ir2vis

#endif  // IR2VIS_PARALLEL_HPP
