#include "decmm/parallel.hpp"

#include <atomic>

#include <omp.h>

namespace decmm {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int num_threads() { return g_threads.load(); }

bool parallel_enabled() { return g_threads.load() != 1; }

namespace kernels {

void for_each_index_serial(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

void for_each_index_parallel(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  const int requested = num_threads();
  if (requested > 0) {
#pragma omp parallel for schedule(static) num_threads(requested)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
  }
}

void for_each_index(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  if (parallel_enabled() && n > 1) {
    for_each_index_parallel(n, fn);
  } else {
    for_each_index_serial(n, fn);
  }
}

}  // namespace kernels
}  // namespace decmm
