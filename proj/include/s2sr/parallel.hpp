#pragma once

#include <cstdint>
#include <functional>

namespace s2sr {

// Worker count from S2SR_THREADS, falling back to hardware concurrency.
int default_threads();

// Runs fn(begin, end) over a static block partition of [0, n).
// threads <= 1 executes inline on the calling thread (no spawn, fully
// deterministic); exceptions from workers are rethrown on the caller.
void parallel_blocks(int64_t n, int threads,
                     const std::function<void(int64_t, int64_t)>& fn);

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

}  // namespace s2sr
