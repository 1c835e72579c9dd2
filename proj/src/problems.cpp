#include "decmm/problems.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "decmm/rng.hpp"

namespace decmm {

std::int64_t MinimaxProblem::total_samples() const {
  std::int64_t total = 0;
  for (int i = 0; i < agents(); ++i) total += local_samples(i);
  return total;
}

double MinimaxProblem::local_loss(int agent, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) const {
  const std::int64_t n = local_samples(agent);
  double acc = 0.0;
  for (std::int64_t j = 0; j < n; ++j) acc += sample_loss(agent, x, y, j);
  return acc / static_cast<double>(n);
}

Eigen::VectorXd MinimaxProblem::best_response(const Eigen::VectorXd&) const {
  throw std::logic_error("best_response is not available for problem kind '" + kind() + "'");
}

void mean_exact_grad(const MinimaxProblem& problem, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y, Eigen::VectorXd& gx, Eigen::VectorXd& gy) {
  const int M = problem.agents();
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(problem.dim_x());
  Eigen::VectorXd ay = Eigen::VectorXd::Zero(problem.dim_y());
  Eigen::VectorXd tx(problem.dim_x()), ty(problem.dim_y());
  for (int i = 0; i < M; ++i) {
    problem.exact_grad(i, x, y, tx, ty);
    ax += tx;
    ay += ty;
  }
  gx = ax / static_cast<double>(M);
  gy = ay / static_cast<double>(M);
}

double estimate_sigma(const MinimaxProblem& problem, const Eigen::MatrixXd& Z) {
  const int M = problem.agents();
  const int dx = problem.dim_x();
  const int dy = problem.dim_y();
  double worst = 0.0;
  Eigen::VectorXd gx(dx), gy(dy), mx(dx), my(dy);
  for (int i = 0; i < M; ++i) {
    const Eigen::VectorXd x = Z.row(i).head(dx).transpose();
    const Eigen::VectorXd y = Z.row(i).tail(dy).transpose();
    problem.exact_grad(i, x, y, mx, my);
    const std::int64_t n = problem.local_samples(i);
    double var = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      problem.sample_grad(i, x, y, j, gx, gy);
      var += (gx - mx).squaredNorm() + (gy - my).squaredNorm();
    }
    worst = std::max(worst, var / static_cast<double>(n));
  }
  return std::sqrt(worst);
}

// ---------------------------------------------------------------------------
// QuadraticGame
// ---------------------------------------------------------------------------

QuadraticGame QuadraticGame::generate(int M, std::int64_t n, int d, double alpha,
                                      std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("QuadraticGame: d must be >= 2");
  if (n < d) throw std::invalid_argument("QuadraticGame: n must be >= d");
  if (M < 1) throw std::invalid_argument("QuadraticGame: M must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("QuadraticGame: alpha must be positive");

  QuadraticGame game;
  game.d_ = d;
  game.n_ = n;
  game.alpha_ = alpha;
  game.seed_ = seed;
  game.agents_.resize(M);

  // Fixed direction removed from every p-sample; P_i u = 0 for all agents.
  rng::Stream dir_stream(seed, rng::Purpose::DataGen, 0xFFFF);
  Eigen::VectorXd u(d);
  for (int k = 0; k < d; ++k) u[k] = dir_stream.normal();
  u.normalize();

  for (int i = 0; i < M; ++i) {
    rng::Stream stream(seed, rng::Purpose::DataGen, static_cast<std::uint64_t>(i));
    auto& data = game.agents_[i];
    data.p.resize(d, n);
    data.q.resize(d, n);
    data.r.resize(d, n);
    for (std::int64_t j = 0; j < n; ++j) {
      for (int k = 0; k < d; ++k) data.p(k, j) = stream.normal();
      data.p.col(j) -= u * u.dot(data.p.col(j));
      for (int k = 0; k < d; ++k) data.q(k, j) = stream.normal();
      for (int k = 0; k < d; ++k) data.r(k, j) = stream.normal();
    }
  }
  game.finalize();
  return game;
}

void QuadraticGame::finalize() {
  const int d = d_;
  const double inv_n = 1.0 / static_cast<double>(n_);
  P_mean_ = Eigen::MatrixXd::Zero(d, d);
  Q_mean_ = Eigen::MatrixXd::Zero(d, d);
  R_mean_ = Eigen::MatrixXd::Zero(d, d);
  for (auto& data : agents_) {
    data.P = inv_n * (data.p * data.p.transpose());
    data.Q = inv_n * (data.q * data.q.transpose()) + alpha_ * Eigen::MatrixXd::Identity(d, d);
    data.R = inv_n * (data.r * data.r.transpose());
    P_mean_ += data.P;
    Q_mean_ += data.Q;
    R_mean_ += data.R;
  }
  const double inv_m = 1.0 / static_cast<double>(agents_.size());
  P_mean_ *= inv_m;
  Q_mean_ *= inv_m;
  R_mean_ *= inv_m;
  Q_mean_llt_.compute(Q_mean_);
  if (Q_mean_llt_.info() != Eigen::Success) {
    throw std::runtime_error("QuadraticGame: mean Q is not positive definite");
  }
}

double QuadraticGame::sample_loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  std::int64_t j) const {
  const auto& data = agents_.at(agent);
  if (j < 0 || j >= n_) throw std::out_of_range("QuadraticGame: sample index");
  const double px = data.p.col(j).dot(x);
  const double qy = data.q.col(j).dot(y);
  const double rx = data.r.col(j).dot(x);
  const double ry = data.r.col(j).dot(y);
  return 0.5 * px * px - 0.5 * qy * qy - 0.5 * alpha_ * y.squaredNorm() + rx * ry;
}

void QuadraticGame::sample_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                std::int64_t j, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
  const auto& data = agents_.at(agent);
  if (j < 0 || j >= n_) throw std::out_of_range("QuadraticGame: sample index");
  const double px = data.p.col(j).dot(x);
  const double qy = data.q.col(j).dot(y);
  const double rx = data.r.col(j).dot(x);
  const double ry = data.r.col(j).dot(y);
  gx = px * data.p.col(j) + ry * data.r.col(j);
  gy = -qy * data.q.col(j) - alpha_ * y + rx * data.r.col(j);
}

void QuadraticGame::exact_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                               Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
  const auto& data = agents_.at(agent);
  gx = data.P * x + data.R * y;
  gy = -(data.Q * y) + data.R * x;
}

Eigen::VectorXd QuadraticGame::best_response(const Eigen::VectorXd& xbar) const {
  const Eigen::VectorXd rhs = R_mean_.transpose() * xbar;
  Eigen::VectorXd y = Q_mean_llt_.solve(rhs);
  y += Q_mean_llt_.solve(rhs - Q_mean_ * y);  // one refinement pass
  return y;
}

SmoothnessConstants QuadraticGame::constants() const {
  const int d = d_;
  SmoothnessConstants c;
  c.mu = std::numeric_limits<double>::infinity();
  c.L = 0.0;
  Eigen::MatrixXd H(2 * d, 2 * d);
  for (const auto& data : agents_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qeig(data.Q);
    c.mu = std::min(c.mu, qeig.eigenvalues().minCoeff());
    H.topLeftCorner(d, d) = data.P;
    H.topRightCorner(d, d) = data.R;
    H.bottomLeftCorner(d, d) = data.R.transpose();
    H.bottomRightCorner(d, d) = -data.Q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> heig(H);
    c.L = std::max(c.L, heig.eigenvalues().cwiseAbs().maxCoeff());
  }
  c.kappa = c.L / c.mu;
  c.sigma = 0.0;
  return c;
}

nlohmann::json QuadraticGame::to_json() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["M"] = agents();
  j["n"] = n_;
  j["d"] = d_;
  j["alpha"] = alpha_;
  j["seed"] = seed_;
  auto dump = [](const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
  };
  auto& arr = j["agents"] = nlohmann::json::array();
  for (const auto& data : agents_) {
    arr.push_back({{"p", dump(data.p)}, {"q", dump(data.q)}, {"r", dump(data.r)}});
  }
  return j;
}

QuadraticGame QuadraticGame::from_json(const nlohmann::json& j) {
  QuadraticGame game;
  game.d_ = j.at("d").get<int>();
  game.n_ = j.at("n").get<std::int64_t>();
  game.alpha_ = j.at("alpha").get<double>();
  game.seed_ = j.at("seed").get<std::uint64_t>();
  const int M = j.at("M").get<int>();
  auto load = [&](const std::vector<double>& flat, Eigen::MatrixXd& m) {
    m.resize(game.d_, game.n_);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat.at(k++);
  };
  game.agents_.resize(M);
  for (int i = 0; i < M; ++i) {
    const auto& a = j.at("agents").at(i);
    load(a.at("p").get<std::vector<double>>(), game.agents_[i].p);
    load(a.at("q").get<std::vector<double>>(), game.agents_[i].q);
    load(a.at("r").get<std::vector<double>>(), game.agents_[i].r);
  }
  game.finalize();
  return game;
}

// ---------------------------------------------------------------------------
// LIBSVM parsing
// ---------------------------------------------------------------------------

LibsvmData parse_libsvm(const std::string& path, int d_cap) {
  std::ifstream in(path);
  if (!in) throw parse_error("libsvm: cannot open '" + path + "'");

  std::vector<std::vector<std::pair<int, double>>> sparse_rows;
  std::vector<double> labels;
  int max_index = 0;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    auto fail = [&](const std::string& msg) -> parse_error {
      return parse_error(path + ":" + std::to_string(line_no) + ": " + msg);
    };

    double label;
    try {
      std::size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw fail("malformed label '" + tok + "'");
    }
    if (label == 0.0) {
      label = -1.0;
    } else if (label != 1.0 && label != -1.0) {
      throw fail("label " + tok + " outside {-1, +1, 0, 1}");
    }

    std::vector<std::pair<int, double>> row;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw fail("malformed feature '" + tok + "'");
      }
      int idx;
      double val;
      try {
        std::size_t used = 0;
        idx = std::stoi(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(tok);
        val = std::stod(tok.substr(colon + 1), &used);
        if (used != tok.size() - colon - 1) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw fail("malformed feature '" + tok + "'");
      }
      if (idx < 1) throw fail("feature index must be >= 1");
      max_index = std::max(max_index, idx);
      row.emplace_back(idx, val);
    }
    sparse_rows.push_back(std::move(row));
    labels.push_back(label);
  }

  const int d = d_cap > 0 ? d_cap : max_index;
  if (d == 0) throw parse_error("libsvm: '" + path + "' contains no features");

  LibsvmData data;
  data.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sparse_rows.size()), d);
  data.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < sparse_rows.size(); ++r) {
    data.labels[static_cast<Eigen::Index>(r)] = labels[r];
    for (const auto& [idx, val] : sparse_rows[r]) {
      if (idx <= d) data.rows(static_cast<Eigen::Index>(r), idx - 1) = val;
    }
  }
  return data;
}

void write_libsvm(const std::string& path, const LibsvmData& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("libsvm: cannot write '" + path + "'");
  out.precision(17);
  for (Eigen::Index r = 0; r < data.rows.rows(); ++r) {
    out << (data.labels[r] > 0 ? "+1" : "-1");
    for (Eigen::Index c = 0; c < data.rows.cols(); ++c) {
      if (data.rows(r, c) != 0.0) out << ' ' << (c + 1) << ':' << data.rows(r, c);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// RobustRegression
// ---------------------------------------------------------------------------

RobustRegression RobustRegression::from_data(const LibsvmData& data, int M, double alpha) {
  if (M < 1) throw std::invalid_argument("RobustRegression: M must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("RobustRegression: alpha must be positive");
  const Eigen::Index N = data.rows.rows();
  if (N < M) throw std::invalid_argument("RobustRegression: fewer rows than agents");

  RobustRegression prob;
  prob.d_ = static_cast<int>(data.rows.cols());
  prob.alpha_ = alpha;
  prob.shards_.resize(M);
  const Eigen::Index base = N / M;
  const Eigen::Index rem = N % M;
  Eigen::Index start = 0;
  for (int i = 0; i < M; ++i) {
    const Eigen::Index len = base + (i < rem ? 1 : 0);
    prob.shards_[i].A = data.rows.middleRows(start, len);
    prob.shards_[i].b = data.labels.segment(start, len);
    start += len;
  }
  return prob;
}

RobustRegression RobustRegression::from_libsvm(const std::string& path, int M, double alpha,
                                               int d_cap) {
  return from_data(parse_libsvm(path, d_cap), M, alpha);
}

RobustRegression RobustRegression::synthetic(int M, std::int64_t n, int d, double alpha,
                                             std::uint64_t seed) {
  LibsvmData data;
  data.rows.resize(M * n, d);
  data.labels.resize(M * n);
  rng::Stream stream(seed, rng::Purpose::DataGen, 0xA11);
  Eigen::VectorXd truth(d);
  for (int k = 0; k < d; ++k) truth[k] = stream.normal();
  for (Eigen::Index r = 0; r < data.rows.rows(); ++r) {
    for (int k = 0; k < d; ++k) data.rows(r, k) = stream.normal();
    const double margin = data.rows.row(r).transpose().dot(truth) + 0.3 * stream.normal();
    data.labels[r] = margin >= 0 ? 1.0 : -1.0;
  }
  return from_data(data, M, alpha);
}

double RobustRegression::sample_loss(int agent, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y, std::int64_t j) const {
  const auto& shard = shards_.at(agent);
  const double r = shard.b[j] - x.dot(shard.A.row(j).transpose() + y);
  return std::log(0.5 * r * r + 1.0) - 0.5 * alpha_ * y.squaredNorm();
}

void RobustRegression::sample_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   std::int64_t j, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
  const auto& shard = shards_.at(agent);
  if (j < 0 || j >= shard.A.rows()) throw std::out_of_range("RobustRegression: sample index");
  const Eigen::VectorXd ay = shard.A.row(j).transpose() + y;
  const double r = shard.b[j] - x.dot(ay);
  const double s = 0.5 * r * r + 1.0;
  gx = (-r / s) * ay;
  gy = (-r / s) * x - alpha_ * y;
}

void RobustRegression::exact_grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
  const std::int64_t n = local_samples(agent);
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(d_);
  Eigen::VectorXd ay_acc = Eigen::VectorXd::Zero(d_);
  Eigen::VectorXd tx(d_), ty(d_);
  for (std::int64_t j = 0; j < n; ++j) {
    sample_grad(agent, x, y, j, tx, ty);
    ax += tx;
    ay_acc += ty;
  }
  gx = ax / static_cast<double>(n);
  gy = ay_acc / static_cast<double>(n);
}

SmoothnessConstants RobustRegression::constants() const {
  // Curvature scale from the data; exact constants exist only for the game.
  double row_norm_sq = 0.0;
  for (const auto& shard : shards_) {
    for (Eigen::Index j = 0; j < shard.A.rows(); ++j) {
      row_norm_sq = std::max(row_norm_sq, shard.A.row(j).squaredNorm());
    }
  }
  SmoothnessConstants c;
  c.mu = alpha_;
  c.L = std::max(alpha_, row_norm_sq) + 1.0;
  c.kappa = c.L / c.mu;
  c.sigma = 0.0;
  return c;
}

nlohmann::json RobustRegression::to_json() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["d"] = d_;
  j["alpha"] = alpha_;
  auto& arr = j["shards"] = nlohmann::json::array();
  for (const auto& shard : shards_) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(shard.A.size()));
    for (Eigen::Index r = 0; r < shard.A.rows(); ++r)
      for (Eigen::Index c = 0; c < shard.A.cols(); ++c) flat.push_back(shard.A(r, c));
    std::vector<double> b(shard.b.data(), shard.b.data() + shard.b.size());
    arr.push_back({{"A", flat}, {"b", b}});
  }
  return j;
}

RobustRegression RobustRegression::from_json(const nlohmann::json& j) {
  RobustRegression prob;
  prob.d_ = j.at("d").get<int>();
  prob.alpha_ = j.at("alpha").get<double>();
  for (const auto& s : j.at("shards")) {
    Shard shard;
    const auto b = s.at("b").get<std::vector<double>>();
    const auto flat = s.at("A").get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(b.size());
    shard.A.resize(n, prob.d_);
    shard.b.resize(n);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      shard.b[r] = b[static_cast<std::size_t>(r)];
      for (int c = 0; c < prob.d_; ++c) shard.A(r, c) = flat.at(k++);
    }
    prob.shards_.push_back(std::move(shard));
  }
  return prob;
}

}  // namespace decmm
