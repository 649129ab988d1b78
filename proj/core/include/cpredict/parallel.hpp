#pragma once

#include <cstddef>
#include <functional>

namespace cpredict {

/// Runs task(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots so scheduling never changes output. The
/// first exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

/// std::thread::hardware_concurrency(), at least 1.
unsigned default_threads();

}  // namespace cpredict
