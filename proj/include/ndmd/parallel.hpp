#pragma once

#include <functional>

namespace ndmd {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index must
/// own its output slot; the only shared state is the work counter. The
/// first exception thrown by any worker is rethrown after the pool joins.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace ndmd
