#pragma once
#include <cstddef>
#include <functional>

namespace gffc {

// Worker count from GFFC_WORKERS, else hardware concurrency (>= 1).
int worker_count();

// Runs fn(i) for i in [0, n) on worker_count() threads. Work items must not share
// mutable state; results are independent of the worker count. The first exception
// thrown by any item is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gffc
