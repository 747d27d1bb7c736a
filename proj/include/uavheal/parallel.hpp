#pragma once

#include <functional>

namespace uavheal {

// Runs body(0) .. body(count - 1) on up to `threads` workers (0: hardware
// concurrency). Callers write into per-index slots so results never depend on
// scheduling. The first exception thrown by any body is rethrown here after
// every worker has stopped.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace uavheal
