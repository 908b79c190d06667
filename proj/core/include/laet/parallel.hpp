#pragma once

#include <cstddef>
#include <functional>

namespace laet {

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 or 1 runs inline).
// Each index must write only its own output slot. The first exception thrown
// by any worker is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

} // namespace laet
