#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "decmm/estimators.hpp"
#include "decmm/metrics.hpp"
#include "decmm/mixing.hpp"
#include "decmm/problems.hpp"

namespace decmm {

struct StepSizes {
  double eta_x = 0.0;
  double eta_y = 0.0;
};

// eta_y = scale/(32 sqrt(5) L) * min(1/kappa, (1-rho)^2), eta_x = eta_y/(64 kappa^2).
StepSizes recommended_stepsizes(double L, double kappa, double rho, double scale = 1.0);

struct PlanOptions {
  double delta_phi = 1.0;  // Phi(x0) - inf Phi
  double delta0 = 1.0;     // ||y*(x0) - y0||^2
  double lambda0 = 1.0;    // max(||Z0_perp||_F^2, ||D0_perp||_F^2)
  double eta_scale = 1.0;
  bool paper_constants = true;  // false drops the explicit constants to 1
};

struct RunPlan {
  std::int64_t T = 1;
  StepSizes eta;
  BatchSchedule schedule;
  EstimatorKind kind = EstimatorKind::Spider;
  double epsilon = 0.0;
  double predicted_T = 0.0;
  double predicted_C = 0.0;  // ceil(T/q) S1 + T S2 per agent
};

// Batch sizes and iteration budget for a target accuracy: S1 ~ kappa^2
// sigma^2 / eps^2 (clamped to 1), q = ceil(sqrt(S1)), S2 = q.
RunPlan plan_budget(double L, double kappa, double rho, double sigma, double epsilon,
                    const PlanOptions& opts = {});

// Predicted per-agent oracle draws for T iterations of a (S1, S2, q) schedule.
std::int64_t predicted_oracle_calls(std::int64_t T, std::int64_t q, std::int64_t s1,
                                    std::int64_t s2);

struct divergence_error : std::runtime_error {
  explicit divergence_error(std::int64_t at)
      : std::runtime_error("divergence detected at iteration " + std::to_string(at)), t(at) {}
  std::int64_t t;
};

// Stacked agent state: Z = [X Y] and the gradient tracker D, both M x (dx+dy).
struct IterateState {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd D;
  EstimatorState est;
  int dx = 0, dy = 0;
  std::int64_t t = 0;
  std::int64_t comm_rounds = 0;

  Eigen::MatrixXd scratch_mix, scratch_v;
};

// V^0 = per-agent refresh at Z0, D^0 = V^0 (so the tracker and estimator
// column means start equal), t = 0.
IterateState init(const MinimaxProblem& problem, const MixingMatrix& mixing,
                  const Eigen::MatrixXd& Z0, const BatchSchedule& schedule, EstimatorKind kind,
                  std::uint64_t seed);

// One iteration: (1) X,Y move along the old tracker through one gossip
// exchange, (2) estimator advances to Z^{t+1}, (3) D <- W((D - V^t) + V^{t+1}),
// (4) counters. Throws divergence_error on non-finite or > 1e12 entries.
void step(IterateState& state, const MixingMatrix& mixing, const StepSizes& eta,
          const MinimaxProblem& problem);

struct RunResult {
  std::vector<MetricsRecord> records;
  Eigen::MatrixXd Z_tau;    // iterate at the uniformly drawn output index
  std::int64_t tau = 0;
  Eigen::MatrixXd Z_final;
  bool diverged = false;
  std::int64_t diverged_t = -1;
};

// Executes plan.T steps from Z0, logging every log_every iterations (t = 0 and
// t = T always included). tau is drawn uniformly from {0, ..., T-1} up front
// and Z^tau captured in passing. Divergence aborts the run and returns the
// partial trajectory with the diverged flag set.
RunResult run(const RunPlan& plan, const MinimaxProblem& problem, const MixingMatrix& mixing,
              const Eigen::MatrixXd& Z0, std::uint64_t seed, std::int64_t log_every);

}  // namespace decmm
