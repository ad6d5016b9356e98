#pragma once

#include <cstddef>
#include <functional>

namespace emgkin {

// Worker count: EMGKIN_THREADS when set and positive, otherwise the
// hardware concurrency (at least 1).
std::size_t default_threads();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
// Each index runs exactly once; the first exception by index is rethrown
// after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace emgkin
