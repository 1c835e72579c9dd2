#include "decmm/estimators.hpp"

#include <algorithm>
#include <stdexcept>

#include "decmm/parallel.hpp"
#include "decmm/rng.hpp"

namespace decmm {

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "spider") return EstimatorKind::Spider;
  if (name == "sgd") return EstimatorKind::Sgd;
  if (name == "storm") return EstimatorKind::Storm;
  if (name == "exact") return EstimatorKind::Exact;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Spider: return "spider";
    case EstimatorKind::Sgd: return "sgd";
    case EstimatorKind::Storm: return "storm";
    case EstimatorKind::Exact: return "exact";
  }
  return "?";
}

std::vector<std::int64_t> draw_batch(std::uint64_t seed, int agent, std::int64_t step,
                                     std::int64_t batch, std::int64_t n) {
  std::vector<std::int64_t> idx;
  if (batch >= n) {
    idx.resize(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = j;
    return idx;
  }
  rng::Stream stream(seed, rng::Purpose::SampleDraw, static_cast<std::uint64_t>(agent),
                     static_cast<std::uint64_t>(step));
  idx.resize(static_cast<std::size_t>(batch));
  for (auto& j : idx) j = stream.uniform_below(n);
  return idx;
}

void batch_gradient(const MinimaxProblem& problem, int agent, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const std::vector<std::int64_t>& idx,
                    Eigen::VectorXd& out) {
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  Eigen::VectorXd gx(dx), gy(dy);
  out = Eigen::VectorXd::Zero(dx + dy);
  for (const std::int64_t j : idx) {
    problem.sample_grad(agent, x, y, j, gx, gy);
    out.head(dx) += gx;
    out.tail(dy) += gy;
  }
  out /= static_cast<double>(idx.size());
}

namespace {

void check_dims(const MinimaxProblem& problem, const Eigen::MatrixXd& Z) {
  if (Z.rows() != problem.agents() || Z.cols() != problem.dim_z()) {
    throw std::invalid_argument("estimator: Z must be M x (dx+dy)");
  }
}

void exact_row(const MinimaxProblem& problem, int agent, const Eigen::MatrixXd& Z,
               Eigen::MatrixXd& V) {
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  const Eigen::VectorXd x = Z.row(agent).head(dx).transpose();
  const Eigen::VectorXd y = Z.row(agent).tail(dy).transpose();
  Eigen::VectorXd gx(dx), gy(dy);
  problem.exact_grad(agent, x, y, gx, gy);
  V.row(agent).head(dx) = gx.transpose();
  V.row(agent).tail(dy) = gy.transpose();
}

}  // namespace

EstimatorState init_estimator(EstimatorKind kind, const BatchSchedule& schedule,
                              const MinimaxProblem& problem, const Eigen::MatrixXd& Z0,
                              std::uint64_t seed) {
  check_dims(problem, Z0);
  if (schedule.s1 < 1 || schedule.s2 < 1 || schedule.q < 1) {
    throw std::invalid_argument("estimator: batch schedule requires s1, s2, q >= 1");
  }
  if (kind == EstimatorKind::Storm && (schedule.beta < 0.0 || schedule.beta > 1.0)) {
    throw std::invalid_argument("estimator: storm beta must lie in [0, 1]");
  }

  EstimatorState state;
  state.kind = kind;
  state.schedule = schedule;
  state.seed = seed;
  state.prev_Z = Z0;
  state.V.resize(Z0.rows(), Z0.cols());

  const int M = problem.agents();
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  kernels::for_each_index(M, [&](std::int64_t i) {
    const int agent = static_cast<int>(i);
    if (kind == EstimatorKind::Exact) {
      exact_row(problem, agent, Z0, state.V);
    } else {
      const Eigen::VectorXd x = Z0.row(agent).head(dx).transpose();
      const Eigen::VectorXd y = Z0.row(agent).tail(dy).transpose();
      const auto idx = draw_batch(seed, agent, 0, schedule.s1, problem.local_samples(agent));
      Eigen::VectorXd v(dx + dy);
      batch_gradient(problem, agent, x, y, idx, v);
      state.V.row(agent) = v.transpose();
    }
  });

  for (int i = 0; i < M; ++i) {
    const std::int64_t n = problem.local_samples(i);
    const std::int64_t b = kind == EstimatorKind::Exact ? n : std::min(schedule.s1, n);
    state.draws += b;
    state.evals += b;
  }
  state.refreshes = 1;
  return state;
}

void estimator_update(EstimatorState& state, const MinimaxProblem& problem,
                      const Eigen::MatrixXd& Z_new) {
  check_dims(problem, Z_new);
  if (Z_new.rows() != state.V.rows() || Z_new.cols() != state.V.cols()) {
    throw std::invalid_argument("estimator: Z_new dimensions changed mid-run");
  }

  const int M = problem.agents();
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  const auto& sched = state.schedule;
  const std::int64_t step = state.t + 1;  // index of the estimate being formed

  // The t=0 refresh happened at init, so the in-loop refresh fires at
  // t = q, 2q, ...; refreshes over a T-step run then total ceil(T/q).
  const bool spider_refresh =
      state.kind == EstimatorKind::Spider && state.t > 0 && state.t % sched.q == 0;

  kernels::for_each_index(M, [&](std::int64_t i) {
    const int agent = static_cast<int>(i);
    const std::int64_t n = problem.local_samples(agent);
    const Eigen::VectorXd x_new = Z_new.row(agent).head(dx).transpose();
    const Eigen::VectorXd y_new = Z_new.row(agent).tail(dy).transpose();

    switch (state.kind) {
      case EstimatorKind::Exact: {
        exact_row(problem, agent, Z_new, state.V);
        break;
      }
      case EstimatorKind::Sgd: {
        const auto idx = draw_batch(state.seed, agent, step, sched.s2, n);
        Eigen::VectorXd v(dx + dy);
        batch_gradient(problem, agent, x_new, y_new, idx, v);
        state.V.row(agent) = v.transpose();
        break;
      }
      case EstimatorKind::Storm: {
        const auto idx = draw_batch(state.seed, agent, step, sched.s2, n);
        const Eigen::VectorXd x_old = state.prev_Z.row(agent).head(dx).transpose();
        const Eigen::VectorXd y_old = state.prev_Z.row(agent).tail(dy).transpose();
        Eigen::VectorXd g_new(dx + dy), g_old(dx + dy);
        batch_gradient(problem, agent, x_new, y_new, idx, g_new);
        batch_gradient(problem, agent, x_old, y_old, idx, g_old);
        // v <- G_new + (1-beta)(v - G_old), grouped so both limits are exact:
        // beta = 0 with a frozen iterate leaves v untouched, beta = 1 is sgd.
        const double keep = 1.0 - sched.beta;
        state.V.row(agent) =
            ((g_new - keep * g_old) + keep * state.V.row(agent).transpose()).transpose();
        break;
      }
      case EstimatorKind::Spider: {
        if (spider_refresh) {
          const auto idx = draw_batch(state.seed, agent, step, sched.s1, n);
          Eigen::VectorXd v(dx + dy);
          batch_gradient(problem, agent, x_new, y_new, idx, v);
          state.V.row(agent) = v.transpose();
        } else {
          // Same samples evaluated at both iterates.
          const auto idx = draw_batch(state.seed, agent, step, sched.s2, n);
          const Eigen::VectorXd x_old = state.prev_Z.row(agent).head(dx).transpose();
          const Eigen::VectorXd y_old = state.prev_Z.row(agent).tail(dy).transpose();
          Eigen::VectorXd g_new(dx + dy), g_old(dx + dy);
          batch_gradient(problem, agent, x_new, y_new, idx, g_new);
          batch_gradient(problem, agent, x_old, y_old, idx, g_old);
          state.V.row(agent) = ((g_new - g_old) + state.V.row(agent).transpose()).transpose();
        }
        break;
      }
    }
  });

  for (int i = 0; i < M; ++i) {
    const std::int64_t n = problem.local_samples(i);
    switch (state.kind) {
      case EstimatorKind::Exact:
        state.draws += n;
        state.evals += n;
        break;
      case EstimatorKind::Sgd:
        state.draws += std::min(sched.s2, n);
        state.evals += std::min(sched.s2, n);
        break;
      case EstimatorKind::Storm:
        state.draws += std::min(sched.s2, n);
        state.evals += 2 * std::min(sched.s2, n);
        break;
      case EstimatorKind::Spider:
        if (spider_refresh) {
          state.draws += std::min(sched.s1, n);
          state.evals += std::min(sched.s1, n);
        } else {
          state.draws += std::min(sched.s2, n);
          state.evals += 2 * std::min(sched.s2, n);
        }
        break;
    }
  }
  if (state.kind == EstimatorKind::Spider) {
    if (spider_refresh) {
      ++state.refreshes;
    } else {
      ++state.corrections;
    }
  }

  state.prev_Z = Z_new;
  ++state.t;
}

double estimator_error(const EstimatorState& state, const MinimaxProblem& problem,
                       const Eigen::MatrixXd& Z) {
  check_dims(problem, Z);
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  double total = 0.0;
  Eigen::VectorXd gx(dx), gy(dy);
  for (int i = 0; i < problem.agents(); ++i) {
    const Eigen::VectorXd x = Z.row(i).head(dx).transpose();
    const Eigen::VectorXd y = Z.row(i).tail(dy).transpose();
    problem.exact_grad(i, x, y, gx, gy);
    total += (state.V.row(i).head(dx).transpose() - gx).squaredNorm();
    total += (state.V.row(i).tail(dy).transpose() - gy).squaredNorm();
  }
  return total;
}

std::int64_t planned_draws(EstimatorKind kind, const BatchSchedule& schedule, std::int64_t n,
                           std::int64_t T) {
  const std::int64_t b1 = std::min(schedule.s1, n);
  const std::int64_t b2 = std::min(schedule.s2, n);
  switch (kind) {
    case EstimatorKind::Exact:
      return n * (T + 1);
    case EstimatorKind::Sgd:
    case EstimatorKind::Storm:
      return b1 + T * b2;
    case EstimatorKind::Spider: {
      if (T == 0) return b1;
      const std::int64_t refreshes = (T + schedule.q - 1) / schedule.q;  // includes init
      const std::int64_t corrections = T + 1 - refreshes;
      return refreshes * b1 + corrections * b2;
    }
  }
  return 0;
}

std::int64_t iterations_for_budget(EstimatorKind kind, const BatchSchedule& schedule,
                                   std::int64_t n, std::int64_t budget) {
  if (planned_draws(kind, schedule, n, 0) > budget) return 0;
  std::int64_t lo = 0, hi = 1;
  while (planned_draws(kind, schedule, n, hi) <= budget) {
    lo = hi;
    if (hi > (std::int64_t{1} << 40)) break;
    hi *= 2;
  }
  while (lo + 1 < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (planned_draws(kind, schedule, n, mid) <= budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace decmm
