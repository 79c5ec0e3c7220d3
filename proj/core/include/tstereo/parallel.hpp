#pragma once

#include <functional>

namespace tstereo {

/// Number of worker threads used by the row-parallel kernels. Results never
/// depend on this value.
void set_thread_count(int threads);
int thread_count();

/// Calls body(row) for every row in [0, rows), possibly concurrently.
void parallel_rows(int rows, const std::function<void(int)>& body);

}  // namespace tstereo
