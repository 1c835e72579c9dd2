#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace decmm {

struct SmoothnessConstants {
  double L = 1.0;      // Lipschitz constant of the local gradients (max over agents)
  double mu = 1.0;     // strong-concavity modulus in y
  double kappa = 1.0;  // L / mu
  double sigma = 0.0;  // oracle standard deviation bound; fill via estimate_sigma
};

// Local finite-sum minimax objective f_i(x, y) with a per-sample stochastic
// oracle. Instances are immutable after construction; all evaluation methods
// are const and safe to call concurrently.
class MinimaxProblem {
 public:
  virtual ~MinimaxProblem() = default;

  virtual std::string kind() const = 0;
  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;
  virtual int agents() const = 0;
  virtual std::int64_t local_samples(int agent) const = 0;
  int dim_z() const { return dim_x() + dim_y(); }
  std::int64_t total_samples() const;

  virtual double sample_loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             std::int64_t j) const = 0;
  virtual void sample_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           std::int64_t j, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const = 0;
  virtual void exact_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          Eigen::VectorXd& gx, Eigen::VectorXd& gy) const = 0;

  double local_loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  virtual bool has_best_response() const { return false; }
  // argmax_y (1/M) sum_i f_i(xbar, y); throws when unavailable.
  virtual Eigen::VectorXd best_response(const Eigen::VectorXd& xbar) const;

  virtual SmoothnessConstants constants() const = 0;
};

// (1/M) sum_i grad f_i evaluated at a common point.
void mean_exact_grad(const MinimaxProblem& problem, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y, Eigen::VectorXd& gx, Eigen::VectorXd& gy);

// max over agents of the exact per-sample gradient variance at the rows of Z
// (agents' points stacked as in the optimizer), computed over the full local
// sample set. Returns the standard deviation.
double estimate_sigma(const MinimaxProblem& problem, const Eigen::MatrixXd& Z);

// Quadratic minimax game: f_i(x, y) = x'P_i x/2 - y'Q_i y/2 + x'R_i y with
// P_i = mean_j p_ij p_ij', Q_i = mean_j q_ij q_ij' + alpha I (so lambda_min >=
// alpha), R_i = mean_j r_ij r_ij'. The p-samples live in a fixed hyperplane,
// which makes every P_i singular: nonconvex in x, strongly concave in y.
class QuadraticGame final : public MinimaxProblem {
 public:
  struct AgentData {
    Eigen::MatrixXd p, q, r;  // d x n raw sample columns
    Eigen::MatrixXd P, Q, R;  // d x d aggregated matrices
  };

  static QuadraticGame generate(int M, std::int64_t n, int d, double alpha, std::uint64_t seed);

  std::string kind() const override { return "pl-game"; }
  int dim_x() const override { return d_; }
  int dim_y() const override { return d_; }
  int agents() const override { return static_cast<int>(agents_.size()); }
  std::int64_t local_samples(int) const override { return n_; }

  double sample_loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     std::int64_t j) const override;
  void sample_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::int64_t j,
                   Eigen::VectorXd& gx, Eigen::VectorXd& gy) const override;
  void exact_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  Eigen::VectorXd& gx, Eigen::VectorXd& gy) const override;

  bool has_best_response() const override { return true; }
  Eigen::VectorXd best_response(const Eigen::VectorXd& xbar) const override;

  SmoothnessConstants constants() const override;

  const AgentData& agent_data(int i) const { return agents_.at(i); }
  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& Q_mean() const { return Q_mean_; }
  const Eigen::MatrixXd& R_mean() const { return R_mean_; }
  const Eigen::MatrixXd& P_mean() const { return P_mean_; }

  nlohmann::json to_json() const;
  static QuadraticGame from_json(const nlohmann::json& j);

 private:
  QuadraticGame() = default;
  void finalize();  // aggregate matrices and factorizations from raw samples

  int d_ = 0;
  std::int64_t n_ = 0;
  double alpha_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<AgentData> agents_;
  Eigen::MatrixXd P_mean_, Q_mean_, R_mean_;
  Eigen::LLT<Eigen::MatrixXd> Q_mean_llt_;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LibsvmData {
  Eigen::MatrixXd rows;  // N x d dense features
  Eigen::VectorXd labels;  // entries in {-1, +1}
};

// `<label> <idx>:<val> ...` with 1-based indices. Labels in {-1, +1, 0, 1};
// 0 maps to -1. d_cap > 0 fixes the dimension and drops higher indices,
// otherwise the max index seen sets it.
LibsvmData parse_libsvm(const std::string& path, int d_cap = 0);
void write_libsvm(const std::string& path, const LibsvmData& data);

// Robust nonconvex linear regression:
// f_i(x, y) = mean_j ln((b_ij - x'(a_ij + y))^2 / 2 + 1) - alpha/2 ||y||^2.
// The y variable perturbs the data, so dim_y == dim_x.
class RobustRegression final : public MinimaxProblem {
 public:
  // Rows sharded contiguously into M near-equal parts (remainder to the
  // first shards).
  static RobustRegression from_data(const LibsvmData& data, int M, double alpha);
  static RobustRegression from_libsvm(const std::string& path, int M, double alpha, int d_cap = 0);
  static RobustRegression synthetic(int M, std::int64_t n, int d, double alpha, std::uint64_t seed);

  std::string kind() const override { return "robust-lr"; }
  int dim_x() const override { return d_; }
  int dim_y() const override { return d_; }
  int agents() const override { return static_cast<int>(shards_.size()); }
  std::int64_t local_samples(int agent) const override { return shards_.at(agent).A.rows(); }

  double sample_loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     std::int64_t j) const override;
  void sample_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::int64_t j,
                   Eigen::VectorXd& gx, Eigen::VectorXd& gy) const override;
  void exact_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  Eigen::VectorXd& gx, Eigen::VectorXd& gy) const override;

  // mu = alpha exactly; L is a data-scale bound used for step planning (the
  // log loss is only locally smooth).
  SmoothnessConstants constants() const override;

  double alpha() const { return alpha_; }

  struct Shard {
    Eigen::MatrixXd A;  // n_i x d
    Eigen::VectorXd b;
  };
  const Shard& shard(int i) const { return shards_.at(i); }

  nlohmann::json to_json() const;
  static RobustRegression from_json(const nlohmann::json& j);

 private:
  RobustRegression() = default;

  int d_ = 0;
  double alpha_ = 1.0;
  std::vector<Shard> shards_;
};

}  // namespace decmm
