#pragma once

#include <cstddef>
#include <functional>

namespace gfom {

// Worker count used when a call passes threads = 0. Defaults to the hardware
// concurrency; set_default_threads(0) restores that.
std::size_t default_threads();
void set_default_threads(std::size_t threads);

// Runs body(i) for i in [0, count). Each index must write only its own output
// slot, which makes results independent of the schedule. If bodies throw, the
// exception from the smallest failing index is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace gfom
