#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "decmm/problems.hpp"

namespace decmm {

// One logged snapshot of a run. dual_subopt and grad_phi are NaN when the
// problem has no closed-form best response.
struct MetricsRecord {
  std::int64_t t = 0;
  double epoch = 0.0;            // total oracle draws / total dataset size
  std::int64_t oracle_calls = 0; // total sample draws across agents
  std::int64_t comm_rounds = 0;
  double stationarity = 0.0;
  double consensus = 0.0;
  double dual_subopt = 0.0;
  double grad_phi = 0.0;
  double est_error = 0.0;
  double wall_time_s = 0.0;
};

// ||Z - 1 zbar^T||_F^2.
double consensus_violation(const Eigen::MatrixXd& Z);

// Column means of the x / y blocks.
Eigen::VectorXd block_mean(const Eigen::MatrixXd& Z, int offset, int len);

// ||sum_i grad_x f_i(xbar, y*)||^2 + ||X_perp||_F^2 + ||Y_perp||_F^2 with y*
// the global best response at xbar. Note the unnormalized sum of gradients.
double stationarity_pl(const QuadraticGame& game, const Eigen::MatrixXd& Z);
// Mean-gradient variant: ||(1/M) sum_i grad_x f_i||^2 + consensus terms.
double stationarity_pl_normalized(const QuadraticGame& game, const Eigen::MatrixXd& Z);

// Proxy without a best response: ||sum_i grad f_i(xbar, ybar)||^2 (full
// gradient) + consensus terms.
double stationarity_proxy(const MinimaxProblem& problem, const Eigen::MatrixXd& Z);
double stationarity_proxy_normalized(const MinimaxProblem& problem, const Eigen::MatrixXd& Z);

// delta = ||y*(xbar) - ybar||^2.
double dual_suboptimality(const QuadraticGame& game, const Eigen::MatrixXd& Z);

// ||grad Phi(xbar)|| = ||(1/M) sum_i grad_x f_i(xbar, y*(xbar))||.
double grad_phi_norm(const QuadraticGame& game, const Eigen::VectorXd& xbar);

// Phi(x) = f(x, y*(x)); used by finite-difference checks.
double primal_value(const QuadraticGame& game, const Eigen::VectorXd& xbar);

}  // namespace decmm
