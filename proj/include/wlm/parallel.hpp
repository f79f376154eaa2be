#pragma once

#include <cstddef>
#include <functional>

namespace wlm {

// Worker count: hardware concurrency, capped by the WLM_THREADS environment
// variable when it holds a positive integer. Always >= 1.
std::size_t worker_count();

// Calls body(i) for i in [0, count). Each index is visited exactly once and
// bodies must write only to index-owned storage, so results do not depend on
// the schedule. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace wlm
