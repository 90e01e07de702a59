#pragma once

#include <cstdint>
#include <functional>

namespace foredif {

/// Worker count for internal parallelism: FOREDIFF_THREADS if set,
/// otherwise the hardware concurrency.
int thread_budget();

/// Runs fn(i) for i in [0, n) across the thread budget. Each index is
/// processed by exactly one worker, so writes to disjoint per-index
/// outputs are race-free and results do not depend on the thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace foredif
