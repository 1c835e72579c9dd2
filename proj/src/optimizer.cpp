#include "decmm/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "decmm/rng.hpp"

namespace decmm {

StepSizes recommended_stepsizes(double L, double kappa, double rho, double scale) {
  if (!(L > 0.0)) throw std::invalid_argument("recommended_stepsizes: L must be positive");
  if (kappa < 1.0) throw std::invalid_argument("recommended_stepsizes: kappa must be >= 1");
  if (rho < 0.0 || rho >= 1.0) {
    throw std::invalid_argument("recommended_stepsizes: rho must lie in [0, 1)");
  }
  StepSizes eta;
  eta.eta_y = scale / (32.0 * std::sqrt(5.0) * L) * std::min(1.0 / kappa, (1.0 - rho) * (1.0 - rho));
  eta.eta_x = eta.eta_y / (64.0 * kappa * kappa);
  return eta;
}

std::int64_t predicted_oracle_calls(std::int64_t T, std::int64_t q, std::int64_t s1,
                                    std::int64_t s2) {
  return ((T + q - 1) / q) * s1 + T * s2;
}

RunPlan plan_budget(double L, double kappa, double rho, double sigma, double epsilon,
                    const PlanOptions& opts) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("plan_budget: epsilon must be positive");
  if (!(L > 0.0) || kappa < 1.0 || sigma < 0.0) {
    throw std::invalid_argument("plan_budget: need L > 0, kappa >= 1, sigma >= 0");
  }

  RunPlan plan;
  plan.kind = EstimatorKind::Spider;
  plan.epsilon = epsilon;
  plan.eta = recommended_stepsizes(L, kappa, rho, opts.eta_scale);

  const double s1_const = opts.paper_constants ? 100.0 * 323.0 : 1.0;
  const double s1_raw = s1_const * kappa * kappa * sigma * sigma / (epsilon * epsilon);
  plan.schedule.s1 = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(s1_raw)));
  plan.schedule.q = static_cast<std::int64_t>(
      std::ceil(std::sqrt(static_cast<double>(plan.schedule.s1))));
  plan.schedule.s2 = plan.schedule.q;

  const double t_const = opts.paper_constants ? 300.0 : 1.0;
  const double t_raw = std::max({opts.delta_phi / plan.eta.eta_x,
                                 18.0 * L * kappa / plan.eta.eta_y * opts.delta0,
                                 9772.0 * L * L * kappa * kappa * opts.lambda0}) *
                       t_const / (epsilon * epsilon);
  plan.predicted_T = t_raw;
  plan.T = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t_raw)));
  plan.predicted_C = static_cast<double>(
      predicted_oracle_calls(plan.T, plan.schedule.q, plan.schedule.s1, plan.schedule.s2));
  return plan;
}

IterateState init(const MinimaxProblem& problem, const MixingMatrix& mixing,
                  const Eigen::MatrixXd& Z0, const BatchSchedule& schedule, EstimatorKind kind,
                  std::uint64_t seed) {
  if (mixing.agents() != problem.agents()) {
    throw std::invalid_argument("init: mixing matrix and problem disagree on agent count");
  }
  if (Z0.rows() != problem.agents() || Z0.cols() != problem.dim_z()) {
    throw std::invalid_argument("init: Z0 must be M x (dx+dy)");
  }
  IterateState state;
  state.dx = problem.dim_x();
  state.dy = problem.dim_y();
  state.Z = Z0;
  state.est = init_estimator(kind, schedule, problem, Z0, seed);
  state.D = state.est.V;
  return state;
}

void step(IterateState& state, const MixingMatrix& mixing, const StepSizes& eta,
          const MinimaxProblem& problem) {
  const int dx = state.dx;
  const int dy = state.dy;

  // Iterate update with the old tracker: X <- WX - eta_x Dx, Y <- WY + eta_y Dy.
  kernels::mix(mixing.W, state.Z, state.scratch_mix);
  Eigen::MatrixXd& Z_new = state.scratch_mix;
  Z_new.leftCols(dx) -= eta.eta_x * state.D.leftCols(dx);
  Z_new.rightCols(dy) += eta.eta_y * state.D.rightCols(dy);

  // Estimator advances to Z^{t+1}; the tracker folds in the estimate change:
  // D <- W((D - V^t) + V^{t+1}).
  state.scratch_v = state.est.V;
  estimator_update(state.est, problem, Z_new);
  state.scratch_v = (state.D - state.scratch_v) + state.est.V;
  kernels::mix(mixing.W, state.scratch_v, state.D);

  state.Z.swap(Z_new);
  ++state.t;
  ++state.comm_rounds;

  const double worst = state.Z.cwiseAbs().maxCoeff();
  if (!std::isfinite(worst) || worst > 1e12 || !state.D.allFinite()) {
    throw divergence_error(state.t);
  }
}

namespace {

MetricsRecord snapshot(const IterateState& state, const MinimaxProblem& problem,
                       double wall_time_s) {
  MetricsRecord rec;
  rec.t = state.t;
  rec.oracle_calls = state.est.draws;
  rec.epoch = static_cast<double>(state.est.draws) / static_cast<double>(problem.total_samples());
  rec.comm_rounds = state.comm_rounds;
  rec.consensus = consensus_violation(state.Z);
  rec.est_error = estimator_error(state.est, problem, state.Z);
  rec.wall_time_s = wall_time_s;
  if (const auto* game = dynamic_cast<const QuadraticGame*>(&problem)) {
    rec.stationarity = stationarity_pl(*game, state.Z);
    rec.dual_subopt = dual_suboptimality(*game, state.Z);
    rec.grad_phi = grad_phi_norm(*game, block_mean(state.Z, 0, game->dim_x()));
  } else {
    rec.stationarity = stationarity_proxy(problem, state.Z);
    rec.dual_subopt = std::numeric_limits<double>::quiet_NaN();
    rec.grad_phi = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

}  // namespace

RunResult run(const RunPlan& plan, const MinimaxProblem& problem, const MixingMatrix& mixing,
              const Eigen::MatrixXd& Z0, std::uint64_t seed, std::int64_t log_every) {
  if (plan.T < 0) throw std::invalid_argument("run: T must be nonnegative");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  RunResult result;
  rng::Stream tau_stream(seed, rng::Purpose::TauDraw);
  result.tau = plan.T > 0 ? tau_stream.uniform_below(plan.T) : 0;

  IterateState state = init(problem, mixing, Z0, plan.schedule, plan.kind, seed);
  result.records.push_back(snapshot(state, problem, elapsed()));
  if (result.tau == 0) result.Z_tau = state.Z;

  for (std::int64_t t = 0; t < plan.T; ++t) {
    try {
      step(state, mixing, plan.eta, problem);
    } catch (const divergence_error& err) {
      result.diverged = true;
      result.diverged_t = err.t;
      result.Z_final = state.Z;
      if (result.Z_tau.size() == 0) result.Z_tau = state.Z;
      return result;
    }
    if (state.t == result.tau) result.Z_tau = state.Z;
    const bool log_now = (log_every > 0 && state.t % log_every == 0) || state.t == plan.T;
    if (log_now) result.records.push_back(snapshot(state, problem, elapsed()));
  }
  result.Z_final = state.Z;
  return result;
}

}  // namespace decmm
