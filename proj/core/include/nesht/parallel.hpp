#pragma once

#include <cstddef>
#include <functional>

namespace nesht {

// Runs fn(i) for every i in [0, count) on up to `workers` threads. Tasks must
// write only to their own output slots; callers reduce afterwards in a fixed
// order, so results never depend on the schedule. The first exception thrown
// by any task is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace nesht
