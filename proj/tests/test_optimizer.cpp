#include <doctest.h>

#include <cmath>

#include "decmm/harness.hpp"
#include "decmm/optimizer.hpp"
#include "reference_spider_gda.hpp"
#include "test_util.hpp"

using namespace decmm;
using testutil::random_matrix;

namespace {

MixingMatrix single_agent_mixing() {
  MixingMatrix mixing;
  mixing.topology.M = 1;
  mixing.W = Eigen::MatrixXd::Identity(1, 1);
  mixing.rho = 0.0;
  return mixing;
}

}  // namespace

TEST_CASE("init sets D = V and inherits the estimator refresh") {
  const auto game = QuadraticGame::generate(4, 30, 5, 1.0, 7);
  const auto mixing = build_ring(4);
  BatchSchedule schedule;
  schedule.s1 = 10;
  rng::Stream stream(1, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 4, game.dim_z());

  const auto state = init(game, mixing, Z0, schedule, EstimatorKind::Spider, 5);
  CHECK(testutil::exactly_equal(state.D, state.est.V));
  CHECK(state.t == 0);
  CHECK(state.comm_rounds == 0);

  // Z0 = 0 on the quadratic game: all sample gradients vanish
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, game.dim_z());
  const auto at_origin = init(game, mixing, zeros, schedule, EstimatorKind::Spider, 5);
  CHECK(at_origin.est.V.cwiseAbs().maxCoeff() == 0.0);
  CHECK(at_origin.D.cwiseAbs().maxCoeff() == 0.0);

  // identical rows start at consensus
  Eigen::MatrixXd consensus_rows(4, game.dim_z());
  consensus_rows.rowwise() = Z0.row(0);
  CHECK(consensus_violation(consensus_rows) == 0.0);

  const auto bad = Eigen::MatrixXd::Zero(3, game.dim_z());
  CHECK_THROWS_AS(init(game, mixing, bad, schedule, EstimatorKind::Spider, 5),
                  std::invalid_argument);
}

TEST_CASE("zero step sizes reduce to pure gossip with geometric consensus decay") {
  const auto game = QuadraticGame::generate(8, 30, 5, 1.0, 9);
  const auto mixing = build_ring(8);
  BatchSchedule schedule;
  schedule.s1 = 5;
  schedule.s2 = 2;
  schedule.q = 4;
  rng::Stream stream(3, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 8, game.dim_z());

  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Spider, 11);
  const StepSizes eta{0.0, 0.0};
  double prev = std::sqrt(consensus_violation(state.Z));
  Eigen::MatrixXd expected = Z0;
  for (int t = 0; t < 60; ++t) {
    step(state, mixing, eta, game);
    expected = mixed(mixing.W, expected);
    CHECK(testutil::exactly_equal(state.Z, expected));  // Z^{t+1} = W Z^t exactly
    const double now = std::sqrt(consensus_violation(state.Z));
    CHECK(now <= mixing.rho * prev + 1e-12);
    prev = now;
  }
  CHECK(prev < 1e-4 * std::sqrt(consensus_violation(Z0)));
}

TEST_CASE("M=1 with the exact estimator is deterministic GDA") {
  const auto game = QuadraticGame::generate(1, 30, 6, 1.0, 13);
  const auto mixing = single_agent_mixing();
  BatchSchedule schedule;
  rng::Stream stream(5, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 1, game.dim_z());

  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Exact, 17);
  auto ref = testref::init_single_agent(game, Z0.row(0).head(6).transpose(),
                                        Z0.row(0).tail(6).transpose(), schedule, 17, true);
  const StepSizes eta{0.02, 0.1};

  double prev_grad_phi = grad_phi_norm(game, block_mean(state.Z, 0, 6));
  for (int t = 0; t < 50; ++t) {
    step(state, mixing, eta, game);
    testref::step_single_agent(game, ref, schedule, eta.eta_x, eta.eta_y, 17, t, true);
    CHECK(state.Z.row(0).head(6).transpose() == ref.x);
    CHECK(state.Z.row(0).tail(6).transpose() == ref.y);

    const double now = grad_phi_norm(game, block_mean(state.Z, 0, 6));
    CHECK(now <= prev_grad_phi * (1.0 + 1e-12));  // monotone early decrease
    prev_grad_phi = now;
  }
}

TEST_CASE("M=1 SPIDER trajectory matches the single-agent reference bit for bit") {
  const auto game = QuadraticGame::generate(1, 60, 6, 1.0, 19);
  const auto mixing = single_agent_mixing();
  BatchSchedule schedule;
  schedule.s1 = 8;
  schedule.s2 = 2;
  schedule.q = 5;
  rng::Stream stream(7, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 1, game.dim_z());
  const std::uint64_t seed = 23;

  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Spider, seed);
  auto ref = testref::init_single_agent(game, Z0.row(0).head(6).transpose(),
                                        Z0.row(0).tail(6).transpose(), schedule, seed, false);
  CHECK(state.est.V.row(0).transpose() == ref.v);

  const StepSizes eta{0.01, 0.05};
  for (int t = 0; t < 300; ++t) {
    step(state, mixing, eta, game);
    testref::step_single_agent(game, ref, schedule, eta.eta_x, eta.eta_y, seed, t, false);
    REQUIRE(state.Z.row(0).head(6).transpose() == ref.x);
    REQUIRE(state.Z.row(0).tail(6).transpose() == ref.y);
    REQUIRE(state.est.V.row(0).transpose() == ref.v);
  }
}

TEST_CASE("recommended step sizes follow the closed form") {
  const auto eta = recommended_stepsizes(1.0, 1.0, 0.0);
  CHECK(eta.eta_y == doctest::Approx(1.0 / (32.0 * std::sqrt(5.0))).epsilon(1e-15));
  CHECK(eta.eta_x == doctest::Approx(eta.eta_y / 64.0).epsilon(1e-15));

  const auto eta10 = recommended_stepsizes(1.0, 10.0, 0.0);
  CHECK(eta10.eta_y == doctest::Approx(1.0 / (320.0 * std::sqrt(5.0))).epsilon(1e-12));
  CHECK(eta10.eta_x == doctest::Approx(eta10.eta_y / 6400.0).epsilon(1e-12));

  // (1 - rho)^2 shrinks eta_y monotonically
  double prev = recommended_stepsizes(1.0, 2.0, 0.5).eta_y;
  for (const double rho : {0.6, 0.8, 0.9, 0.99}) {
    const double now = recommended_stepsizes(1.0, 2.0, rho).eta_y;
    CHECK(now < prev);
    prev = now;
  }

  const auto scaled = recommended_stepsizes(1.0, 1.0, 0.0, 10.0);
  CHECK(scaled.eta_y == doctest::Approx(10.0 / (32.0 * std::sqrt(5.0))).epsilon(1e-12));

  CHECK_THROWS_AS(recommended_stepsizes(1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(recommended_stepsizes(0.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(recommended_stepsizes(1.0, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("budget planning follows the published counting") {
  CHECK(predicted_oracle_calls(100, 10, 100, 10) == 2000);

  const auto plan = plan_budget(1.0, 2.0, 0.5, 1.0, 0.1);
  // floor effects at the 1/epsilon^2 boundary allow one count of slack
  CHECK(std::llabs(plan.schedule.s1 -
                   static_cast<std::int64_t>(std::floor(100.0 * 323.0 * 4.0 / 0.01))) <= 1);
  CHECK(plan.schedule.q ==
        static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(plan.schedule.s1)))));
  CHECK(plan.schedule.s2 == plan.schedule.q);

  const auto plan_half = plan_budget(1.0, 2.0, 0.5, 1.0, 0.05);
  const double s1_ratio =
      static_cast<double>(plan_half.schedule.s1) / static_cast<double>(plan.schedule.s1);
  CHECK(s1_ratio == doctest::Approx(4.0).epsilon(1e-6));
  const double t_ratio = static_cast<double>(plan_half.T) / static_cast<double>(plan.T);
  CHECK(t_ratio == doctest::Approx(4.0).epsilon(1e-6));

  const auto degenerate = plan_budget(1.0, 2.0, 0.5, 0.0, 0.1);
  CHECK(degenerate.schedule.s1 == 1);  // sigma = 0 clamps to a singleton batch

  const auto unit = plan_budget(1.0, 2.0, 0.5, 1.0, 0.1, {.paper_constants = false});
  CHECK(std::llabs(unit.schedule.s1 - static_cast<std::int64_t>(std::floor(4.0 / 0.01))) <= 1);
}

TEST_CASE("tracking and average-iterate identities hold over long runs") {
  const auto game = QuadraticGame::generate(8, 50, 10, 1.0, 29);
  const auto mixing = build_ring(8);
  const auto c = game.constants();
  const StepSizes eta = recommended_stepsizes(c.L, c.kappa, mixing.rho, 50.0);
  BatchSchedule schedule;
  schedule.s1 = 10;
  schedule.s2 = 2;
  schedule.q = 5;
  rng::Stream stream(11, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 8, game.dim_z());

  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Spider, 31);
  double worst_track = 0.0;
  double worst_avg = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Eigen::RowVectorXd xbar_old = state.Z.leftCols(10).colwise().mean();
    const Eigen::RowVectorXd vbar_x_old = state.est.V.leftCols(10).colwise().mean();
    step(state, mixing, eta, game);
    const Eigen::RowVectorXd xbar_new = state.Z.leftCols(10).colwise().mean();
    worst_avg = std::max(
        worst_avg,
        (xbar_new - (xbar_old - eta.eta_x * vbar_x_old)).cwiseAbs().maxCoeff());
    worst_track = std::max(worst_track, (state.D.colwise().mean() - state.est.V.colwise().mean())
                                            .cwiseAbs()
                                            .maxCoeff());
    CHECK(state.comm_rounds == state.t);
  }
  CHECK(worst_track <= 1e-8);
  CHECK(worst_avg <= 1e-8);
}

TEST_CASE("divergence guard reports the failing iteration") {
  const auto game = QuadraticGame::generate(4, 30, 5, 1.0, 37);
  const auto mixing = build_ring(4);
  BatchSchedule schedule;
  schedule.s1 = 5;
  rng::Stream stream(13, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 4, game.dim_z());

  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Exact, 41);
  const StepSizes eta{1e6, 1e6};
  bool threw = false;
  for (int t = 0; t < 100 && !threw; ++t) {
    try {
      step(state, mixing, eta, game);
    } catch (const divergence_error& err) {
      threw = true;
      CHECK(err.t == state.t);
    }
  }
  CHECK(threw);

  RunPlan plan;
  plan.T = 100;
  plan.eta = eta;
  plan.schedule = schedule;
  plan.kind = EstimatorKind::Exact;
  const auto result = run(plan, game, mixing, Z0, 41, 10);
  CHECK(result.diverged);
  CHECK(result.diverged_t >= 1);
  CHECK(result.records.size() >= 1);  // partial trajectory retained
}

TEST_CASE("run bookkeeping: tau, logging, and determinism") {
  const auto game = QuadraticGame::generate(4, 30, 5, 1.0, 43);
  const auto mixing = build_ring(4);
  RunPlan plan;
  plan.schedule.s1 = 5;
  plan.schedule.s2 = 2;
  plan.schedule.q = 3;
  plan.kind = EstimatorKind::Spider;
  const auto c = game.constants();
  plan.eta = recommended_stepsizes(c.L, c.kappa, mixing.rho, 10.0);
  rng::Stream stream(17, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 4, game.dim_z());

  SUBCASE("T = 1 outputs the initial iterate") {
    plan.T = 1;
    const auto result = run(plan, game, mixing, Z0, 47, 1);
    CHECK(result.tau == 0);
    CHECK(testutil::exactly_equal(result.Z_tau, Z0));
  }

  SUBCASE("T = 0 logs exactly the initial record") {
    plan.T = 0;
    const auto result = run(plan, game, mixing, Z0, 47, 1);
    CHECK(result.records.size() == 1);
    CHECK(result.records[0].t == 0);
    CHECK(testutil::exactly_equal(result.Z_final, Z0));
  }

  SUBCASE("identical seeds give identical trajectories and tau") {
    plan.T = 40;
    const auto a = run(plan, game, mixing, Z0, 49, 7);
    const auto b = run(plan, game, mixing, Z0, 49, 7);
    CHECK(a.tau == b.tau);
    CHECK(testutil::exactly_equal(a.Z_final, b.Z_final));
    CHECK(testutil::exactly_equal(a.Z_tau, b.Z_tau));
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      CHECK(a.records[k].stationarity == b.records[k].stationarity);
      CHECK(a.records[k].oracle_calls == b.records[k].oracle_calls);
    }
    // final record is always logged
    CHECK(a.records.back().t == 40);
    CHECK(a.records.back().comm_rounds == 40);
  }
}

TEST_CASE("one-step reduction at M=1: iterates move along V") {
  const auto game = QuadraticGame::generate(1, 30, 5, 1.0, 53);
  const auto mixing = single_agent_mixing();
  BatchSchedule schedule;
  schedule.s1 = 6;
  rng::Stream stream(19, rng::Purpose::DataGen);
  const Eigen::MatrixXd Z0 = random_matrix(stream, 1, game.dim_z());
  auto state = init(game, mixing, Z0, schedule, EstimatorKind::Spider, 59);
  const Eigen::MatrixXd V0 = state.est.V;
  const StepSizes eta{0.3, 0.7};
  step(state, mixing, eta, game);
  for (int c = 0; c < 5; ++c) {
    CHECK(state.Z(0, c) == Z0(0, c) - eta.eta_x * V0(0, c));
    CHECK(state.Z(0, 5 + c) == Z0(0, 5 + c) + eta.eta_y * V0(0, 5 + c));
  }
}
