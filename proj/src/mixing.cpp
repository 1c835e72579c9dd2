#include "decmm/mixing.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "decmm/parallel.hpp"
#include "decmm/rng.hpp"

namespace decmm {

namespace {

bool doubly_stochastic_within(const Eigen::MatrixXd& W, double tol) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(W.rows());
  const double row_resid = (W * ones - ones).cwiseAbs().maxCoeff();
  const double col_resid = (W.transpose() * ones - ones).cwiseAbs().maxCoeff();
  return row_resid <= tol && col_resid <= tol;
}

Eigen::MatrixXd deviation_from_average(const Eigen::MatrixXd& W) {
  const auto M = W.rows();
  return W - Eigen::MatrixXd::Constant(M, M, 1.0 / static_cast<double>(M));
}

void require_doubly_stochastic(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) throw contract_violation("spectral_gap: W must be square");
  if (!doubly_stochastic_within(W, 1e-10)) {
    throw contract_violation("spectral_gap: W is not doubly stochastic within 1e-10");
  }
}

}  // namespace

double spectral_gap_dense(const Eigen::MatrixXd& W) {
  require_doubly_stochastic(W);
  const Eigen::MatrixXd C = deviation_from_average(W);
  const Eigen::MatrixXd B = C.transpose() * C;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectral_gap: eigensolver failed");
  const double lambda_max = solver.eigenvalues().maxCoeff();
  return std::sqrt(std::max(0.0, lambda_max));
}

double spectral_gap_power(const Eigen::MatrixXd& W, double rel_tol) {
  require_doubly_stochastic(W);
  const auto M = W.rows();
  const Eigen::MatrixXd C = deviation_from_average(W);
  const Eigen::MatrixXd B = C.transpose() * C;

  rng::Stream stream(0xD0C5u, rng::Purpose::GraphGen, static_cast<std::uint64_t>(M));
  Eigen::VectorXd v(M);
  for (Eigen::Index i = 0; i < M; ++i) v[i] = stream.normal();
  v.normalize();

  double lambda = 0.0;
  constexpr int kMaxIters = 200000;
  for (int it = 0; it < kMaxIters; ++it) {
    Eigen::VectorXd w = B * v;
    const double norm = w.norm();
    if (norm < 1e-300) return 0.0;  // W == Pi
    const double lambda_new = norm;
    v = w / norm;
    if (it >= 50 && std::abs(lambda_new - lambda) <= rel_tol * lambda_new) {
      lambda = lambda_new;
      break;
    }
    lambda = lambda_new;
  }
  return std::sqrt(lambda);
}

double spectral_gap(const Eigen::MatrixXd& W) {
  return W.rows() <= 64 ? spectral_gap_dense(W) : spectral_gap_power(W);
}

MixingMatrix build_ring(int M) {
  if (M < 3) throw std::invalid_argument("build_ring: M must be >= 3 for equal 1/3 weights");
  MixingMatrix mixing;
  mixing.topology = ring_topology(M);
  mixing.W = Eigen::MatrixXd::Zero(M, M);
  const double third = 1.0 / 3.0;
  for (int i = 0; i < M; ++i) {
    mixing.W(i, (i + M - 1) % M) += third;
    mixing.W(i, i) += third;
    mixing.W(i, (i + 1) % M) += third;
  }
  mixing.rho = spectral_gap(mixing.W);
  return mixing;
}

MixingMatrix metropolis_weights(const Topology& topology) {
  if (!topology.connected()) throw std::invalid_argument("metropolis_weights: topology must be connected");
  const int M = topology.M;
  const auto deg = topology.degrees();
  MixingMatrix mixing;
  mixing.topology = topology;
  mixing.W = Eigen::MatrixXd::Zero(M, M);
  for (const auto& [i, j] : topology.edges) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(deg[i], deg[j])));
    mixing.W(i, j) = w;
    mixing.W(j, i) = w;
  }
  for (int i = 0; i < M; ++i) {
    mixing.W(i, i) = 1.0 - mixing.W.row(i).sum();
  }
  mixing.rho = spectral_gap(mixing.W);
  return mixing;
}

ValidationReport validate(const MixingMatrix& mixing) {
  ValidationReport report;
  const auto& W = mixing.W;
  const auto M = W.rows();

  report.min_entry = W.minCoeff();
  report.nonnegative = report.min_entry >= -1e-15;

  report.pattern_violations = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      if (i == j) continue;
      if (W(i, j) != 0.0 && !mixing.topology.has_edge(static_cast<int>(i), static_cast<int>(j))) {
        ++report.pattern_violations;
      }
    }
  }
  report.pattern_ok = report.pattern_violations == 0;

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(M);
  report.max_row_residual = (W * ones - ones).cwiseAbs().maxCoeff();
  report.max_col_residual = (W.transpose() * ones - ones).cwiseAbs().maxCoeff();
  report.doubly_stochastic = report.max_row_residual <= 1e-12 && report.max_col_residual <= 1e-12;

  if (doubly_stochastic_within(W, 1e-10)) {
    report.rho = spectral_gap(W);
    report.spectral_ok = report.rho < 1.0 - 1e-10;
  } else {
    report.rho = std::numeric_limits<double>::quiet_NaN();
    report.spectral_ok = false;
  }
  return report;
}

std::string ValidationReport::str() const {
  std::ostringstream out;
  out << "nonnegativity:      " << (nonnegative ? "pass" : "FAIL")
      << " (min entry " << min_entry << ")\n"
      << "zero pattern:       " << (pattern_ok ? "pass" : "FAIL")
      << " (" << pattern_violations << " off-edge nonzeros)\n"
      << "doubly stochastic:  " << (doubly_stochastic ? "pass" : "FAIL")
      << " (row residual " << max_row_residual << ", col residual " << max_col_residual << ")\n"
      << "spectral:           " << (spectral_ok ? "pass" : "FAIL") << " (rho " << rho << ")\n"
      << "overall:            " << (pass() ? "pass" : "FAIL");
  return out.str();
}

nlohmann::json MixingMatrix::to_json() const {
  nlohmann::json j = topology.to_json();
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(W.size()));
  for (Eigen::Index r = 0; r < W.rows(); ++r)
    for (Eigen::Index c = 0; c < W.cols(); ++c) weights.push_back(W(r, c));
  j["weights"] = weights;
  j["rho"] = rho;
  return j;
}

MixingMatrix MixingMatrix::from_json(const nlohmann::json& j) {
  if (j.contains("scheme")) {
    const auto scheme = j.at("scheme").get<std::string>();
    if (scheme == "ring") return build_ring(j.at("M").get<int>());
    if (scheme == "metropolis") return metropolis_weights(Topology::from_json(j));
    throw std::invalid_argument("mixing: unknown scheme '" + scheme + "'");
  }
  MixingMatrix mixing;
  mixing.topology = Topology::from_json(j);
  const int M = mixing.topology.M;
  const auto weights = j.at("weights").get<std::vector<double>>();
  if (weights.size() != static_cast<std::size_t>(M) * static_cast<std::size_t>(M)) {
    throw std::invalid_argument("mixing: weights must be a row-major MxM array");
  }
  mixing.W.resize(M, M);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) mixing.W(r, c) = weights[static_cast<std::size_t>(r) * M + c];
  mixing.rho = spectral_gap(mixing.W);
  return mixing;
}

namespace kernels {

namespace {
inline void mix_row(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out,
                    Eigen::Index i) {
  out.row(i).setZero();
  for (Eigen::Index k = 0; k < W.cols(); ++k) {
    const double w = W(i, k);
    if (w != 0.0) out.row(i) += w * A.row(k);
  }
}
}  // namespace

void mix_serial(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out) {
  out.resize(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i) mix_row(W, A, out, i);
}

void mix_parallel(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out) {
  out.resize(A.rows(), A.cols());
  for_each_index_parallel(W.rows(), [&](std::int64_t i) { mix_row(W, A, out, i); });
}

void mix(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A, Eigen::MatrixXd& out) {
  if (parallel_enabled() && W.rows() > 1) {
    mix_parallel(W, A, out);
  } else {
    mix_serial(W, A, out);
  }
}

}  // namespace kernels

Eigen::MatrixXd mixed(const Eigen::MatrixXd& W, const Eigen::MatrixXd& A) {
  Eigen::MatrixXd out;
  kernels::mix(W, A, out);
  return out;
}

}  // namespace decmm
