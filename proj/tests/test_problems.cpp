#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "decmm/problems.hpp"
#include "test_util.hpp"

using namespace decmm;
using testutil::fd_gradient;
using testutil::random_vector;

namespace {

QuadraticGame small_game(std::uint64_t seed = 21) {
  return QuadraticGame::generate(4, 40, 6, 1.0, seed);
}

RobustRegression small_regression(std::uint64_t seed = 31) {
  return RobustRegression::synthetic(3, 25, 5, 1.0, seed);
}

}  // namespace

TEST_CASE("pl game generator produces singular P and conditioned Q") {
  const auto game = QuadraticGame::generate(5, 60, 8, 1.0, 77);
  for (int i = 0; i < game.agents(); ++i) {
    const auto& data = game.agent_data(i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(data.P);
    CHECK(peig.eigenvalues().minCoeff() <= 1e-10);
    CHECK(peig.eigenvalues().minCoeff() >= -1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qeig(data.Q);
    CHECK(qeig.eigenvalues().minCoeff() >= 1.0 - 1e-9);
  }
}

TEST_CASE("pl game generator is deterministic and validates arguments") {
  const auto a = small_game(5);
  const auto b = small_game(5);
  CHECK(testutil::exactly_equal(a.agent_data(0).p, b.agent_data(0).p));
  CHECK(testutil::exactly_equal(a.agent_data(2).r, b.agent_data(2).r));

  CHECK_THROWS_AS(QuadraticGame::generate(4, 40, 1, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(QuadraticGame::generate(4, 3, 6, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(QuadraticGame::generate(4, 40, 6, 0.0, 1), std::invalid_argument);
}

TEST_CASE("quad sample gradients vanish at the origin") {
  const auto game = small_game();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(game.dim_x());
  Eigen::VectorXd gx(game.dim_x()), gy(game.dim_y());
  game.sample_grad(1, zero, zero, 3, gx, gy);
  CHECK(gx.norm() == 0.0);
  CHECK(gy.norm() == 0.0);
}

TEST_CASE("quad sample gradients average to the exact gradient") {
  const auto game = small_game();
  rng::Stream stream(13, rng::Purpose::DataGen);
  for (int i = 0; i < game.agents(); ++i) {
    const Eigen::VectorXd x = random_vector(stream, game.dim_x());
    const Eigen::VectorXd y = random_vector(stream, game.dim_y());
    Eigen::VectorXd acc_x = Eigen::VectorXd::Zero(game.dim_x());
    Eigen::VectorXd acc_y = Eigen::VectorXd::Zero(game.dim_y());
    Eigen::VectorXd gx(game.dim_x()), gy(game.dim_y());
    for (std::int64_t j = 0; j < game.local_samples(i); ++j) {
      game.sample_grad(i, x, y, j, gx, gy);
      acc_x += gx;
      acc_y += gy;
    }
    acc_x /= static_cast<double>(game.local_samples(i));
    acc_y /= static_cast<double>(game.local_samples(i));
    game.exact_grad(i, x, y, gx, gy);
    CHECK((acc_x - gx).norm() < 1e-10);
    CHECK((acc_y - gy).norm() < 1e-10);
  }
}

TEST_CASE("sample gradients match finite differences") {
  const auto game = small_game();
  const auto reg = small_regression();
  rng::Stream stream(17, rng::Purpose::DataGen);

  auto check_problem = [&](const MinimaxProblem& problem, int agent, std::int64_t j) {
    const int dx = problem.dim_x();
    const int dy = problem.dim_y();
    const Eigen::VectorXd x = random_vector(stream, dx);
    const Eigen::VectorXd y = random_vector(stream, dy);
    Eigen::VectorXd gx(dx), gy(dy);
    problem.sample_grad(agent, x, y, j, gx, gy);
    Eigen::VectorXd z(dx + dy);
    z << x, y;
    const Eigen::VectorXd fd = fd_gradient(
        [&](const Eigen::VectorXd& zz) {
          return problem.sample_loss(agent, zz.head(dx), zz.tail(dy), j);
        },
        z);
    Eigen::VectorXd g(dx + dy);
    g << gx, gy;
    CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
  };

  for (int rep = 0; rep < 25; ++rep) {
    check_problem(game, rep % game.agents(), rep % game.local_samples(0));
    check_problem(reg, rep % reg.agents(), rep % reg.local_samples(0));
  }
}

TEST_CASE("best response solves the concave maximization") {
  const auto game = small_game();
  rng::Stream stream(19, rng::Purpose::DataGen);

  CHECK(game.best_response(Eigen::VectorXd::Zero(game.dim_x())).norm() == 0.0);

  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd xbar = random_vector(stream, game.dim_x());
    const Eigen::VectorXd ystar = game.best_response(xbar);
    Eigen::VectorXd gx(game.dim_x()), gy(game.dim_y());
    mean_exact_grad(game, xbar, ystar, gx, gy);
    CHECK(gy.norm() <= 1e-8);
  }
}

TEST_CASE("best response agrees with iterative gradient ascent") {
  const auto game = small_game();
  rng::Stream stream(23, rng::Purpose::DataGen);
  const auto c = game.constants();
  const Eigen::VectorXd xbar = random_vector(stream, game.dim_x());
  const Eigen::VectorXd ystar = game.best_response(xbar);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(game.dim_y());
  Eigen::VectorXd gx(game.dim_x()), gy(game.dim_y());
  for (int it = 0; it < 10000; ++it) {
    mean_exact_grad(game, xbar, y, gx, gy);
    y += (1.0 / c.L) * gy;
  }
  CHECK((y - ystar).norm() < 1e-6);
}

TEST_CASE("constants: degenerate q-samples give mu = alpha") {
  auto game = small_game();
  nlohmann::json j = game.to_json();
  for (auto& agent : j["agents"]) {
    auto q = agent["q"].get<std::vector<double>>();
    std::fill(q.begin(), q.end(), 0.0);
    agent["q"] = q;
  }
  const auto degenerate = QuadraticGame::from_json(j);
  const auto c = degenerate.constants();
  CHECK(c.mu == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constants: L dominates the block norms and matches power iteration") {
  const auto game = small_game();
  const auto c = game.constants();
  const int d = game.dim_x();
  double max_block = 0.0;
  double power_L = 0.0;
  for (int i = 0; i < game.agents(); ++i) {
    const auto& data = game.agent_data(i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qeig(data.Q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(data.P);
    max_block = std::max({max_block, qeig.eigenvalues().cwiseAbs().maxCoeff(),
                          peig.eigenvalues().cwiseAbs().maxCoeff()});
    Eigen::MatrixXd H(2 * d, 2 * d);
    H.topLeftCorner(d, d) = data.P;
    H.topRightCorner(d, d) = data.R;
    H.bottomLeftCorner(d, d) = data.R.transpose();
    H.bottomRightCorner(d, d) = -data.Q;
    power_L = std::max(power_L, testutil::power_norm_sym(H));
  }
  CHECK(c.L >= max_block - 1e-12);
  CHECK(std::abs(power_L - c.L) < 1e-8);
  CHECK(c.kappa == doctest::Approx(c.L / c.mu));
}

TEST_CASE("regression gradient closed forms") {
  const auto reg = small_regression();
  rng::Stream stream(29, rng::Purpose::DataGen);
  const int d = reg.dim_x();

  SUBCASE("x = 0") {
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd y = random_vector(stream, d);
    Eigen::VectorXd gx(d), gy(d);
    const auto& shard = reg.shard(0);
    for (std::int64_t j = 0; j < 5; ++j) {
      reg.sample_grad(0, x, y, j, gx, gy);
      const double b = shard.b[j];
      const Eigen::VectorXd expected_gx =
          (-b / (0.5 * b * b + 1.0)) * (shard.A.row(j).transpose() + y);
      CHECK((gx - expected_gx).norm() < 1e-14);
      CHECK((gy + reg.alpha() * y).norm() < 1e-14);  // gy = -alpha y exactly
    }
  }

  SUBCASE("perfect fit r = 0 at y = 0") {
    const auto& shard = reg.shard(1);
    const Eigen::VectorXd a = shard.A.row(2).transpose();
    const Eigen::VectorXd x = (shard.b[2] / a.squaredNorm()) * a;  // b - x'a = 0
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd gx(d), gy(d);
    reg.sample_grad(1, x, y, 2, gx, gy);
    CHECK(gx.norm() < 1e-12);
    CHECK(gy.norm() < 1e-12);
  }
}

TEST_CASE("regression mean sample gradient equals exact gradient") {
  const auto reg = small_regression();
  rng::Stream stream(37, rng::Purpose::DataGen);
  const int d = reg.dim_x();
  const Eigen::VectorXd x = random_vector(stream, d);
  const Eigen::VectorXd y = random_vector(stream, d);
  for (int i = 0; i < reg.agents(); ++i) {
    Eigen::VectorXd acc_x = Eigen::VectorXd::Zero(d), acc_y = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd gx(d), gy(d);
    for (std::int64_t j = 0; j < reg.local_samples(i); ++j) {
      reg.sample_grad(i, x, y, j, gx, gy);
      acc_x += gx;
      acc_y += gy;
    }
    acc_x /= static_cast<double>(reg.local_samples(i));
    acc_y /= static_cast<double>(reg.local_samples(i));
    reg.exact_grad(i, x, y, gx, gy);
    CHECK((acc_x - gx).norm() < 1e-10);
    CHECK((acc_y - gy).norm() < 1e-10);
  }
}

TEST_CASE("single-sample oracle is unbiased (monte carlo)") {
  const auto game = QuadraticGame::generate(2, 30, 4, 1.0, 3);
  const auto reg = RobustRegression::synthetic(2, 30, 4, 1.0, 5);
  rng::Stream point_stream(41, rng::Purpose::DataGen);

  auto check = [&](const MinimaxProblem& problem) {
    const int dx = problem.dim_x();
    const int dy = problem.dim_y();
    const Eigen::VectorXd x = random_vector(point_stream, dx);
    const Eigen::VectorXd y = random_vector(point_stream, dy);
    Eigen::VectorXd mean_x(dx), mean_y(dy);
    problem.exact_grad(0, x, y, mean_x, mean_y);

    constexpr int kDraws = 100000;
    const std::int64_t n = problem.local_samples(0);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dx + dy);
    Eigen::VectorXd acc_sq = Eigen::VectorXd::Zero(dx + dy);
    Eigen::VectorXd gx(dx), gy(dy), g(dx + dy);
    rng::Stream draw_stream(43, rng::Purpose::SampleDraw);
    for (int b = 0; b < kDraws; ++b) {
      const auto j = draw_stream.uniform_below(n);
      problem.sample_grad(0, x, y, j, gx, gy);
      g << gx, gy;
      acc += g;
      acc_sq += g.cwiseProduct(g);
    }
    const Eigen::VectorXd mean = acc / kDraws;
    Eigen::VectorXd expected(dx + dy);
    expected << mean_x, mean_y;
    const Eigen::VectorXd var = acc_sq / kDraws - mean.cwiseProduct(mean);
    for (int k = 0; k < dx + dy; ++k) {
      const double band = 4.0 * std::sqrt(std::max(var[k], 1e-30) / kDraws);
      CHECK(std::abs(mean[k] - expected[k]) <= band + 1e-12);
    }
  };

  check(game);
  check(reg);
}

TEST_CASE("quadratic game is mu-strongly concave in y") {
  const auto game = small_game();
  const auto c = game.constants();
  rng::Stream stream(47, rng::Purpose::DataGen);
  for (int rep = 0; rep < 20; ++rep) {
    const int i = rep % game.agents();
    const Eigen::VectorXd x = random_vector(stream, game.dim_x());
    const Eigen::VectorXd y = random_vector(stream, game.dim_y());
    const Eigen::VectorXd y2 = random_vector(stream, game.dim_y());
    Eigen::VectorXd gx(game.dim_x()), gy(game.dim_y());
    game.exact_grad(i, x, y, gx, gy);
    const double lhs = game.local_loss(i, x, y2);
    const double rhs = game.local_loss(i, x, y) + gy.dot(y2 - y) -
                       0.5 * c.mu * (y2 - y).squaredNorm();
    CHECK(lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("best response map is kappa-Lipschitz") {
  const auto game = small_game();
  const auto c = game.constants();
  rng::Stream stream(53, rng::Purpose::DataGen);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::VectorXd x1 = random_vector(stream, game.dim_x());
    const Eigen::VectorXd x2 = random_vector(stream, game.dim_x());
    const double lhs = (game.best_response(x1) - game.best_response(x2)).norm();
    CHECK(lhs <= 1.05 * c.kappa * (x1 - x2).norm());
  }
}

TEST_CASE("libsvm parser handles the basic grammar") {
  const std::string path = "test_libsvm_basic.txt";
  {
    std::ofstream out(path);
    out << "+1 3:0.5 7:1.0\n";
    out << "-1 1:2.0\n";
    out << "0 2:1.5\n";  // 0 maps to -1
  }
  const auto data = parse_libsvm(path, 8);
  CHECK(data.rows.rows() == 3);
  CHECK(data.rows.cols() == 8);
  CHECK(data.labels[0] == 1.0);
  CHECK(data.labels[1] == -1.0);
  CHECK(data.labels[2] == -1.0);
  CHECK(data.rows(0, 2) == 0.5);
  CHECK(data.rows(0, 6) == 1.0);
  CHECK(data.rows(0, 0) == 0.0);
  CHECK(data.rows(1, 0) == 2.0);
  std::filesystem::remove(path);
}

TEST_CASE("libsvm parser reports malformed lines and bad labels") {
  const std::string path = "test_libsvm_bad.txt";
  {
    std::ofstream out(path);
    out << "+1 1:1.0\n";
    out << "+1 oops\n";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_libsvm(path)), doctest::Contains(":2:"),
                       parse_error);
  {
    std::ofstream out(path);
    out << "+3 1:1.0\n";
  }
  CHECK_THROWS_AS(static_cast<void>(parse_libsvm(path)), parse_error);
  std::filesystem::remove(path);
}

TEST_CASE("libsvm round trip is exact") {
  rng::Stream stream(59, rng::Purpose::DataGen);
  LibsvmData data;
  data.rows = Eigen::MatrixXd::Zero(50, 12);
  data.labels.resize(50);
  for (int r = 0; r < 50; ++r) {
    data.labels[r] = stream.next_double() < 0.5 ? -1.0 : 1.0;
    for (int c = 0; c < 12; ++c) {
      if (stream.next_double() < 0.4) data.rows(r, c) = stream.normal();
    }
    if (data.rows.row(r).cwiseAbs().maxCoeff() == 0.0) data.rows(r, 0) = 1.0;
  }
  const std::string path = "test_libsvm_roundtrip.txt";
  write_libsvm(path, data);
  const auto back = parse_libsvm(path, 12);
  CHECK(testutil::exactly_equal(back.rows, data.rows));
  CHECK(testutil::exactly_equal(back.labels, data.labels));
  std::filesystem::remove(path);
}

TEST_CASE("regression shards split contiguously with remainder up front") {
  LibsvmData data;
  data.rows = Eigen::MatrixXd::Random(10, 3);
  data.labels = Eigen::VectorXd::Ones(10);
  const auto prob = RobustRegression::from_data(data, 3, 1.0);
  CHECK(prob.local_samples(0) == 4);
  CHECK(prob.local_samples(1) == 3);
  CHECK(prob.local_samples(2) == 3);
  CHECK(testutil::exactly_equal(prob.shard(0).A, data.rows.topRows(4)));
  CHECK(testutil::exactly_equal(prob.shard(2).A, data.rows.bottomRows(3)));
}

TEST_CASE("problem json snapshots round trip") {
  const auto game = small_game();
  const auto game2 = QuadraticGame::from_json(game.to_json());
  CHECK(testutil::exactly_equal(game.agent_data(1).P, game2.agent_data(1).P));
  CHECK(testutil::exactly_equal(game.Q_mean(), game2.Q_mean()));

  const auto reg = small_regression();
  const auto reg2 = RobustRegression::from_json(reg.to_json());
  CHECK(testutil::exactly_equal(reg.shard(1).A, reg2.shard(1).A));
  CHECK(testutil::exactly_equal(reg.shard(1).b, reg2.shard(1).b));
}

TEST_CASE("estimate_sigma is zero for single-sample shards and positive otherwise") {
  const auto reg1 = RobustRegression::synthetic(2, 1, 4, 1.0, 61);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(2, 8);
  CHECK(estimate_sigma(reg1, Z) == 0.0);

  const auto game = small_game();
  Eigen::MatrixXd Zg = Eigen::MatrixXd::Ones(game.agents(), game.dim_z());
  CHECK(estimate_sigma(game, Zg) > 0.0);
}
