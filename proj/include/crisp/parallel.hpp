#pragma once

#include <cstddef>
#include <functional>

namespace crisp {

/// Worker count: CRISP_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Calls fn(i) for i in [0, n). Work is split across worker_count() threads;
/// results must only depend on i, so the outcome is independent of the
/// worker count. The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace crisp
