#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace gplm::util {

// Worker count from GPLM_THREADS, defaulting to the hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) across worker threads. Each index is processed
// exactly once; callers keep determinism by writing results into slot i.
// Exceptions are captured and rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gplm::util
