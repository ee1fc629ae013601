#pragma once

#include <cstddef>
#include <functional>

namespace chestprog {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write results
/// into per-index slots so the outcome never depends on scheduling.
/// Rethrows the lowest-index exception after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace chestprog
