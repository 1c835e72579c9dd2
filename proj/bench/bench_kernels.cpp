// Timings for the OpenMP kernels against their serial references: the gossip
// mix and the per-agent estimator update.

#include <chrono>
#include <cstdio>

#include "decmm/estimators.hpp"
#include "decmm/mixing.hpp"
#include "decmm/parallel.hpp"
#include "decmm/problems.hpp"
#include "decmm/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double bench_mix(bool parallel, bool dense, int M, int cols, int reps) {
  decmm::rng::Stream stream(3, decmm::rng::Purpose::DataGen);
  Eigen::MatrixXd W;
  if (dense) {
    W = decmm::metropolis_weights(decmm::erdos_renyi(M, 0.5, 7)).W;
  } else {
    W = Eigen::MatrixXd::Zero(M, M);
    for (int i = 0; i < M; ++i) {
      W(i, (i + M - 1) % M) = 1.0 / 3.0;
      W(i, i) = 1.0 / 3.0;
      W(i, (i + 1) % M) = 1.0 / 3.0;
    }
  }
  Eigen::MatrixXd A(M, cols);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < cols; ++c) A(r, c) = stream.normal();
  Eigen::MatrixXd out;

  const auto start = Clock::now();
  for (int rep = 0; rep < reps; ++rep) {
    if (parallel) {
      decmm::kernels::mix_parallel(W, A, out);
    } else {
      decmm::kernels::mix_serial(W, A, out);
    }
    A.swap(out);
    A *= 0.999;  // keep values bounded across reps
  }
  return ms_since(start);
}

double bench_estimator(int threads, int M, std::int64_t n, int d, int reps) {
  decmm::set_num_threads(threads);
  const auto game = decmm::QuadraticGame::generate(M, n, d, 1.0, 11);
  decmm::BatchSchedule schedule;
  schedule.s1 = n;  // full refresh every step: heaviest per-agent load
  schedule.s2 = n;
  schedule.q = 1;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(M, 2 * d);
  auto state = decmm::init_estimator(decmm::EstimatorKind::Sgd, schedule, game, Z, 5);

  const auto start = Clock::now();
  for (int rep = 0; rep < reps; ++rep) {
    decmm::estimator_update(state, game, Z);
  }
  const double elapsed = ms_since(start);
  decmm::set_num_threads(0);
  return elapsed;
}

}  // namespace

int main() {
  std::printf("gossip mix, W (MxM) times Z (Mx(d+m))\n");
  std::printf("%6s %8s %8s %12s %12s %9s\n", "graph", "M", "cols", "serial ms", "omp ms",
              "speedup");
  for (const auto& [dense, M, cols, reps] :
       {std::tuple{false, 256, 256, 400}, {true, 256, 256, 100}, {true, 512, 512, 12}}) {
    bench_mix(false, dense, M, cols, 2);  // warm-up
    const double serial = bench_mix(false, dense, M, cols, reps);
    const double parallel = bench_mix(true, dense, M, cols, reps);
    std::printf("%6s %8d %8d %12.2f %12.2f %8.2fx\n", dense ? "er" : "ring", M, cols, serial,
                parallel, serial / parallel);
  }

  std::printf("\nper-agent full-batch gradient update\n");
  std::printf("%8s %8s %8s %12s %12s %9s\n", "M", "n", "d", "serial ms", "omp ms", "speedup");
  for (const auto& [M, n, d, reps] : {std::tuple{8, 20000, 25, 30}, {32, 20000, 25, 8}}) {
    const double serial = bench_estimator(1, M, n, d, reps);
    const double parallel = bench_estimator(0, M, n, d, reps);
    std::printf("%8d %8d %8d %12.2f %12.2f %8.2fx\n", M, n, d, serial, parallel,
                serial / parallel);
  }
  return 0;
}
