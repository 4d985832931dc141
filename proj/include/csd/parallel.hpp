#pragma once

#include <cstddef>
#include <functional>

namespace csd {

/// Worker count used by parallel_for. Resolution order: set_max_threads()
/// override, then the CSD_THREADS environment variable, then hardware
/// concurrency. Always >= 1.
std::size_t max_threads();

/// Overrides the worker cap for this process; 0 clears the override.
void set_max_threads(std::size_t n);

/// Runs body(i) for i in [0, n) over at most max_threads() workers.
/// Each index is visited exactly once; results must be written to
/// per-index slots so the outcome does not depend on the worker count.
/// If several bodies throw, the exception from the lowest index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace csd
