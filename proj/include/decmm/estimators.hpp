#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "decmm/problems.hpp"

namespace decmm {

enum class EstimatorKind { Spider, Sgd, Storm, Exact };

EstimatorKind estimator_from_string(const std::string& name);
std::string to_string(EstimatorKind kind);

struct BatchSchedule {
  std::int64_t s1 = 1;  // refresh batch
  std::int64_t s2 = 1;  // correction batch
  std::int64_t q = 1;   // refresh period
  double beta = 0.1;    // STORM mixing weight, in [0, 1]
};

// Per-agent stochastic gradient estimates V = [v_1, ..., v_M]^T plus the
// history the chosen estimator needs. Counters track per-agent sample draws
// (a SPIDER correction draws s2 samples and evaluates each at two points:
// draws += s2, evals += 2*s2).
struct EstimatorState {
  EstimatorKind kind = EstimatorKind::Spider;
  BatchSchedule schedule;
  std::uint64_t seed = 0;
  Eigen::MatrixXd V;       // M x (dx+dy)
  Eigen::MatrixXd prev_Z;  // iterate V was last anchored at
  std::int64_t t = 0;      // index of the current estimate
  std::int64_t draws = 0;  // per-agent oracle sample draws, including the t=0 refresh
  std::int64_t evals = 0;  // per-agent gradient evaluations
  std::int64_t refreshes = 0;
  std::int64_t corrections = 0;
};

// Deterministic per-(agent, step) minibatch indices; batch >= n returns the
// full index set 0..n-1 without consuming the stream.
std::vector<std::int64_t> draw_batch(std::uint64_t seed, int agent, std::int64_t step,
                                     std::int64_t batch, std::int64_t n);

// Mean sample gradient over idx at (x, y) stacked into out (size dx+dy).
void batch_gradient(const MinimaxProblem& problem, int agent, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const std::vector<std::int64_t>& idx,
                    Eigen::VectorXd& out);

// v^0: an s1-size refresh at Z0 for every agent (exact gradient for the
// Exact kind). Counts as the first refresh of the run, so refreshes over a
// T-step run total ceil(T/q).
EstimatorState init_estimator(EstimatorKind kind, const BatchSchedule& schedule,
                              const MinimaxProblem& problem, const Eigen::MatrixXd& Z0,
                              std::uint64_t seed);

// Advances V to the estimate at Z_new. SPIDER refreshes when the loop index t
// (== state.t) satisfies t > 0 and t % q == 0; other steps evaluate the same
// s2 samples at Z_new and the previous iterate and apply the recursive
// correction. Agents update independently (and in parallel).
void estimator_update(EstimatorState& state, const MinimaxProblem& problem,
                      const Eigen::MatrixXd& Z_new);

// ||V - exact gradients at Z||_F^2; diagnostic only.
double estimator_error(const EstimatorState& state, const MinimaxProblem& problem,
                       const Eigen::MatrixXd& Z);

// Closed-form per-agent draw count after T update steps (init included),
// matching the counters exactly.
std::int64_t planned_draws(EstimatorKind kind, const BatchSchedule& schedule, std::int64_t n,
                           std::int64_t T);

// Largest T with planned_draws(T) <= budget (at least 0).
std::int64_t iterations_for_budget(EstimatorKind kind, const BatchSchedule& schedule,
                                   std::int64_t n, std::int64_t budget);

}  // namespace decmm
