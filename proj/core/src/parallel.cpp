#include "tstereo/parallel.hpp"

#include <omp.h>

#include <algorithm>

namespace tstereo {

void set_thread_count(int threads) { omp_set_num_threads(std::max(1, threads)); }

int thread_count() { return omp_get_max_threads(); }

void parallel_rows(int rows, const std::function<void(int)>& body) {
#pragma omp parallel for schedule(static)
  for (int v = 0; v < rows; ++v) body(v);
}

}  // namespace tstereo
