#pragma once

#include <cstddef>
#include <functional>

namespace bt {

/// Worker count: BT_THREADS if set and positive, otherwise the hardware
/// concurrency. Read once per process.
std::size_t thread_count();

/// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks;
/// callers must write results to per-index slots so any reduction stays in
/// index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bt
