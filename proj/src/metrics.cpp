#include "decmm/metrics.hpp"

namespace decmm {

double consensus_violation(const Eigen::MatrixXd& Z) {
  const Eigen::RowVectorXd mean = Z.colwise().mean();
  return (Z.rowwise() - mean).squaredNorm();
}

Eigen::VectorXd block_mean(const Eigen::MatrixXd& Z, int offset, int len) {
  return Z.middleCols(offset, len).colwise().mean().transpose();
}

namespace {

double pl_stationarity(const QuadraticGame& game, const Eigen::MatrixXd& Z, bool normalized) {
  const int d = game.dim_x();
  const Eigen::VectorXd xbar = block_mean(Z, 0, d);
  const Eigen::VectorXd ystar = game.best_response(xbar);
  Eigen::VectorXd grad = game.P_mean() * xbar + game.R_mean() * ystar;  // (1/M) sum grad_x f_i
  if (!normalized) grad *= static_cast<double>(game.agents());
  return grad.squaredNorm() + consensus_violation(Z);
}

double proxy_stationarity(const MinimaxProblem& problem, const Eigen::MatrixXd& Z,
                          bool normalized) {
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  const Eigen::VectorXd xbar = block_mean(Z, 0, dx);
  const Eigen::VectorXd ybar = block_mean(Z, dx, dy);
  Eigen::VectorXd gx(dx), gy(dy);
  mean_exact_grad(problem, xbar, ybar, gx, gy);
  double sq = gx.squaredNorm() + gy.squaredNorm();
  if (!normalized) {
    const double M = static_cast<double>(problem.agents());
    sq *= M * M;
  }
  return sq + consensus_violation(Z);
}

}  // namespace

double stationarity_pl(const QuadraticGame& game, const Eigen::MatrixXd& Z) {
  return pl_stationarity(game, Z, false);
}

double stationarity_pl_normalized(const QuadraticGame& game, const Eigen::MatrixXd& Z) {
  return pl_stationarity(game, Z, true);
}

double stationarity_proxy(const MinimaxProblem& problem, const Eigen::MatrixXd& Z) {
  return proxy_stationarity(problem, Z, false);
}

double stationarity_proxy_normalized(const MinimaxProblem& problem, const Eigen::MatrixXd& Z) {
  return proxy_stationarity(problem, Z, true);
}

double dual_suboptimality(const QuadraticGame& game, const Eigen::MatrixXd& Z) {
  const int d = game.dim_x();
  const Eigen::VectorXd xbar = block_mean(Z, 0, d);
  const Eigen::VectorXd ybar = block_mean(Z, d, game.dim_y());
  return (game.best_response(xbar) - ybar).squaredNorm();
}

double grad_phi_norm(const QuadraticGame& game, const Eigen::VectorXd& xbar) {
  const Eigen::VectorXd ystar = game.best_response(xbar);
  return (game.P_mean() * xbar + game.R_mean() * ystar).norm();
}

double primal_value(const QuadraticGame& game, const Eigen::VectorXd& xbar) {
  const Eigen::VectorXd ystar = game.best_response(xbar);
  const int M = game.agents();
  double value = 0.0;
  for (int i = 0; i < M; ++i) {
    const auto& data = game.agent_data(i);
    value += 0.5 * xbar.dot(data.P * xbar) - 0.5 * ystar.dot(data.Q * ystar) +
             xbar.dot(data.R * ystar);
  }
  return value / static_cast<double>(M);
}

}  // namespace decmm
