#pragma once

#include <cstddef>
#include <functional>

namespace breathscope {

/// Thread count actually used: `requested` (0 = hardware concurrency) capped
/// by the BREATHSCOPE_THREADS environment variable when set.
int resolve_thread_count(int requested);

/// Runs body(i) for i in [0, count) across the given number of workers.
/// Results must be written to per-index slots; scheduling never affects them.
/// The first exception thrown by a worker is rethrown after the join.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace breathscope
