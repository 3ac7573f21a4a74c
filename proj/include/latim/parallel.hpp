#pragma once

#include <cstddef>
#include <functional>

namespace latim {

// Worker count: hardware concurrency, capped by the LATIM_THREADS env var when set.
std::size_t worker_count();

// Runs body(k) for k in [0, n) over worker_count() threads. Each index is
// visited exactly once; the first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace latim
