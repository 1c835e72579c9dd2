#pragma once

#include <cstdint>
#include <functional>

namespace decmm {

// Worker-thread count for the agent-parallel kernels. 0 means the OpenMP
// default; 1 forces the serial path everywhere.
void set_num_threads(int n);
int num_threads();
bool parallel_enabled();

namespace kernels {

// Runs fn(i) for i in [0, n). The parallel variant uses a static OpenMP
// schedule; fn must only touch state owned by index i, which also makes the
// parallel result bitwise identical to the serial one.
void for_each_index_serial(std::int64_t n, const std::function<void(std::int64_t)>& fn);
void for_each_index_parallel(std::int64_t n, const std::function<void(std::int64_t)>& fn);
void for_each_index(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace kernels
}  // namespace decmm
