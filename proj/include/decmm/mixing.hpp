#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "decmm/topology.hpp"

namespace decmm {

// Precondition failure on a numerical contract (e.g. a matrix that is not
// doubly stochastic where one is required).
struct contract_violation : std::logic_error {
  using std::logic_error::logic_error;
};

// Gossip matrix for one synchronous communication round. W is nonnegative,
// doubly stochastic, and zero off the topology's edge pattern; rho caches
// ||W - Pi||_2 where Pi = (1/M) 1 1^T.
struct MixingMatrix {
  Topology topology;
  Eigen::MatrixXd W;
  double rho = 0.0;

  int agents() const { return topology.M; }

  nlohmann::json to_json() const;
  static MixingMatrix from_json(const nlohmann::json& j);
};

// Cycle graph with equal weights: w_{i,i-1} = w_{i,i} = w_{i,i+1} = 1/3
// (indices mod M). Requires M >= 3.
MixingMatrix build_ring(int M);

// Metropolis-Hastings weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges,
// diagonal absorbs the remainder. Symmetric, hence doubly stochastic.
MixingMatrix metropolis_weights(const Topology& topology);

// ||W - Pi||_2. Dense eigendecomposition for M <= 64, power iteration above.
// Requires W doubly stochastic within 1e-10; throws contract_violation
// otherwise. The value itself may be >= 1 (validate() flags that case).
double spectral_gap(const Eigen::MatrixXd& W);
double spectral_gap_dense(const Eigen::MatrixXd& W);
double spectral_gap_power(const Eigen::MatrixXd& W, double rel_tol = 1e-12);

struct ValidationReport {
  bool nonnegative = false;
  bool pattern_ok = false;
  bool doubly_stochastic = false;
  bool spectral_ok = false;
  double min_entry = 0.0;
  int pattern_violations = 0;
  double max_row_residual = 0.0;
  double max_col_residual = 0.0;
  double rho = 0.0;

  bool pass() const { return nonnegative && pattern_ok && doubly_stochastic && spectral_ok; }
  std::string str() const;
};

// Checks the three mixing-matrix properties (decentralized zero pattern,
// doubly stochastic, spectral) and reports measured residuals.
ValidationReport validate(const MixingMatrix& mixing);

namespace kernels {

// out = W * A with a fixed inner accumulation order, so the parallel variant
// (rows fan out across threads) is bitwise identical to the serial one.
void mix_serial(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out);
void mix_parallel(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out);
void mix(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out);

}  // namespace kernels

Eigen::MatrixXd mixed(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A);

}  // namespace decmm
