#include "decmm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "decmm/csv.hpp"
#include "decmm/rng.hpp"

namespace decmm {

namespace {

constexpr const char* kVersion = "0.1.0";

void pool_run(std::int64_t tasks, const std::function<void(std::int64_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::int64_t workers = std::min<std::int64_t>(hw, tasks);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t half = v.size() / 2;
  const std::vector<double> lower(v.begin(), v.begin() + half);
  const std::vector<double> upper(v.begin() + (v.size() - half), v.end());
  return median_of(upper) - median_of(lower);
}

nlohmann::json record_to_json(const MetricsRecord& rec) {
  return {{"t", rec.t},
          {"epoch", rec.epoch},
          {"oracle_calls", rec.oracle_calls},
          {"comm_rounds", rec.comm_rounds},
          {"stationarity", rec.stationarity},
          {"consensus", rec.consensus},
          {"dual_subopt", rec.dual_subopt},
          {"grad_phi_norm", rec.grad_phi},
          {"est_error", rec.est_error}};
}

}  // namespace

std::unique_ptr<MinimaxProblem> build_problem(const ProblemSpec& spec) {
  if (spec.kind == "pl-game") {
    return std::make_unique<QuadraticGame>(
        QuadraticGame::generate(spec.agents, spec.samples, spec.dim, spec.alpha, spec.data_seed));
  }
  if (spec.kind == "robust-lr") {
    if (!spec.dataset.empty()) {
      return std::make_unique<RobustRegression>(
          RobustRegression::from_libsvm(spec.dataset, spec.agents, spec.alpha, spec.d_cap));
    }
    return std::make_unique<RobustRegression>(RobustRegression::synthetic(
        spec.agents, spec.samples, spec.dim, spec.alpha, spec.data_seed));
  }
  throw config_error("problem.kind: unknown '" + spec.kind + "'");
}

MixingMatrix build_graph(const GraphSpec& spec, int agents) {
  if (spec.kind == "ring") return build_ring(agents);
  if (spec.kind == "er") return metropolis_weights(erdos_renyi(agents, spec.p, spec.seed));
  throw config_error("graph.kind: unknown '" + spec.kind + "'");
}

Eigen::MatrixXd initial_point(const RunSpec& spec, int M, int dz) {
  rng::Stream stream(spec.z0_seed, rng::Purpose::InitialPoint);
  Eigen::MatrixXd Z0(M, dz);
  if (spec.z0_consensus) {
    Eigen::RowVectorXd row(dz);
    for (int c = 0; c < dz; ++c) row[c] = spec.z0_scale * stream.normal();
    Z0.rowwise() = row;
  } else {
    for (int i = 0; i < M; ++i)
      for (int c = 0; c < dz; ++c) Z0(i, c) = spec.z0_scale * stream.normal();
  }
  return Z0;
}

RunPlan build_plan(const ExperimentConfig& config, const MinimaxProblem& problem,
                   const MixingMatrix& mixing, const std::string& estimator) {
  RunPlan plan;
  plan.kind = estimator_from_string(estimator);
  plan.schedule.s1 = config.algorithm.s1;
  plan.schedule.s2 = config.algorithm.s2;
  plan.schedule.q = config.algorithm.q;

  if (config.algorithm.stepsize == "manual") {
    plan.eta.eta_x = config.algorithm.eta_x;
    plan.eta.eta_y = config.algorithm.eta_y;
  } else {
    const SmoothnessConstants c = problem.constants();
    plan.eta = recommended_stepsizes(c.L, c.kappa, mixing.rho, config.algorithm.eta_scale);
  }

  plan.schedule.beta = config.algorithm.beta_mode == "auto"
                           ? std::min(1.0, config.algorithm.storm_c * plan.eta.eta_y * plan.eta.eta_y)
                           : config.algorithm.beta;

  if (config.run.iterations >= 0) {
    plan.T = config.run.iterations;
  } else {
    const double mean_local = static_cast<double>(problem.total_samples()) /
                              static_cast<double>(problem.agents());
    const auto budget = static_cast<std::int64_t>(std::llround(config.run.epochs * mean_local));
    plan.T = iterations_for_budget(plan.kind, plan.schedule, problem.local_samples(0), budget);
  }
  plan.predicted_C = static_cast<double>(
      predicted_oracle_calls(plan.T, plan.schedule.q, plan.schedule.s1, plan.schedule.s2));
  return plan;
}

std::vector<std::string> config_warnings(const ExperimentConfig& config) {
  std::vector<std::string> warnings;
  if (config.algorithm.estimator == "spider" && config.algorithm.s2 < config.algorithm.q) {
    warnings.push_back("algorithm.s2 < algorithm.q: outside the schedule the analysis assumes");
  }
  return warnings;
}

std::vector<std::string> trajectory_columns(bool with_best_response) {
  if (with_best_response) {
    return {"t",         "epoch",     "oracle_calls", "comm_rounds", "stationarity",
            "consensus", "dual_subopt", "grad_phi_norm", "est_error"};
  }
  return {"t", "epoch", "oracle_calls", "comm_rounds", "stationarity", "consensus", "est_error"};
}

void write_trajectory_csv(const std::string& path, const std::vector<MetricsRecord>& records,
                          bool with_best_response) {
  CsvBuilder csv(trajectory_columns(with_best_response));
  for (const auto& rec : records) {
    std::vector<std::string> row{std::to_string(rec.t),
                                 format_double(rec.epoch),
                                 std::to_string(rec.oracle_calls),
                                 std::to_string(rec.comm_rounds),
                                 format_double(rec.stationarity),
                                 format_double(rec.consensus)};
    if (with_best_response) {
      row.push_back(format_double(rec.dual_subopt));
      row.push_back(format_double(rec.grad_phi));
    }
    row.push_back(format_double(rec.est_error));
    csv.add_row(row);
  }
  csv.write(path);
}

namespace {

ExperimentSummary run_one_method(const ExperimentConfig& config, const MinimaxProblem& problem,
                                 const MixingMatrix& mixing, const std::string& method) {
  const RunPlan plan = build_plan(config, problem, mixing, method);
  const Eigen::MatrixXd Z0 = initial_point(config.run, problem.agents(), problem.dim_z());
  const bool with_br = problem.has_best_response();

  ExperimentSummary summary;
  summary.config_hash = config.hash();
  summary.name = config.name;
  summary.method = method;
  summary.iterations = plan.T;
  summary.runs.resize(config.run.seeds.size());

  pool_run(static_cast<std::int64_t>(config.run.seeds.size()), [&](std::int64_t k) {
    const std::uint64_t seed = config.run.seeds[static_cast<std::size_t>(k)];
    const RunResult result = run(plan, problem, mixing, Z0, seed, config.run.log_every);
    RunArtifact art;
    art.seed = seed;
    art.tau = result.tau;
    art.iterations = plan.T;
    art.diverged = result.diverged;
    art.diverged_t = result.diverged_t;
    art.final_record = result.records.back();
    art.csv_path = config.run.output + "/" + config.name + "_" + method + "_seed" +
                   std::to_string(seed) + ".csv";
    write_trajectory_csv(art.csv_path, result.records, with_br);
    summary.runs[static_cast<std::size_t>(k)] = std::move(art);
  });

  std::vector<double> stat, cons, dual;
  for (const auto& art : summary.runs) {
    if (art.diverged) continue;
    stat.push_back(art.final_record.stationarity);
    cons.push_back(art.final_record.consensus);
    if (with_br) dual.push_back(art.final_record.dual_subopt);
    summary.total_oracle_calls += art.final_record.oracle_calls;
    summary.total_comm_rounds += art.final_record.comm_rounds;
  }
  summary.median_final_stationarity = median_of(stat);
  summary.iqr_final_stationarity = iqr_of(stat);
  summary.median_final_consensus = median_of(cons);
  summary.median_final_dual = with_br ? median_of(dual) : std::numeric_limits<double>::quiet_NaN();
  return summary;
}

}  // namespace

nlohmann::json ExperimentSummary::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["name"] = name;
  j["method"] = method;
  j["iterations"] = iterations;
  j["versions"] = {{"decmm", kVersion}};
  j["median_final_stationarity"] = median_final_stationarity;
  j["iqr_final_stationarity"] = iqr_final_stationarity;
  j["median_final_consensus"] = median_final_consensus;
  j["median_final_dual"] = median_final_dual;
  j["total_oracle_calls"] = total_oracle_calls;
  j["total_comm_rounds"] = total_comm_rounds;
  auto& runs_json = j["runs"] = nlohmann::json::array();
  for (const auto& art : runs) {
    runs_json.push_back({{"seed", art.seed},
                         {"csv", art.csv_path},
                         {"tau", art.tau},
                         {"iterations", art.iterations},
                         {"diverged", art.diverged},
                         {"diverged_t", art.diverged_t},
                         {"final", record_to_json(art.final_record)}});
  }
  return j;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto problem = build_problem(config.problem);
  const MixingMatrix mixing = build_graph(config.graph, config.problem.agents);
  ExperimentSummary summary =
      run_one_method(config, *problem, mixing, config.algorithm.estimator);
  write_file_atomic(config.run.output + "/" + config.name + "_" + config.algorithm.estimator +
                        "_summary.json",
                    summary.to_json().dump(2) + "\n");
  return summary;
}

nlohmann::json CompareReport::to_json() const {
  nlohmann::json j;
  j["methods"] = methods;
  j["budget_per_agent"] = budget_per_agent;
  j["warnings"] = warnings;
  auto& summaries_json = j["summaries"] = nlohmann::json::array();
  for (const auto& s : summaries) summaries_json.push_back(s.to_json());
  j["wins"] = wins;
  return j;
}

CompareReport compare_methods(const ExperimentConfig& config,
                              const std::vector<std::string>& methods) {
  if (methods.size() < 2) {
    throw std::invalid_argument("compare_methods: >= 2 methods required");
  }
  validate_config(config);
  const auto problem = build_problem(config.problem);
  const MixingMatrix mixing = build_graph(config.graph, config.problem.agents);

  CompareReport report;
  report.methods = methods;

  // Matched oracle budget: every method gets the smallest per-agent draw
  // count any of them would consume at the configured horizon.
  std::int64_t budget = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> natural(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const RunPlan plan = build_plan(config, *problem, mixing, methods[m]);
    natural[m] = planned_draws(plan.kind, plan.schedule, problem->local_samples(0), plan.T);
    budget = std::min(budget, natural[m]);
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (natural[m] != budget) {
      report.warnings.push_back("method '" + methods[m] +
                                "' budget normalized down to matched minimum");
    }
  }
  report.budget_per_agent = budget;

  for (const auto& method : methods) {
    ExperimentConfig derived = config;
    derived.algorithm.estimator = method;
    const RunPlan probe = build_plan(derived, *problem, mixing, method);
    derived.run.iterations =
        iterations_for_budget(probe.kind, probe.schedule, problem->local_samples(0), budget);
    derived.run.epochs = -1.0;
    report.summaries.push_back(run_one_method(derived, *problem, mixing, method));
  }

  const std::size_t n_methods = methods.size();
  report.wins.assign(n_methods, std::vector<int>(n_methods, 0));
  for (std::size_t a = 0; a < n_methods; ++a) {
    for (std::size_t b = 0; b < n_methods; ++b) {
      if (a == b) continue;
      const auto& ra = report.summaries[a].runs;
      const auto& rb = report.summaries[b].runs;
      for (std::size_t k = 0; k < std::min(ra.size(), rb.size()); ++k) {
        if (ra[k].diverged || rb[k].diverged) continue;
        if (ra[k].final_record.stationarity < rb[k].final_record.stationarity) {
          ++report.wins[a][b];
        }
      }
    }
  }

  write_file_atomic(config.run.output + "/" + config.name + "_compare.json",
                    report.to_json().dump(2) + "\n");
  return report;
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json j;
  j["axis"] = spec.axis;
  j["values"] = spec.values;
  j["replicates"] = spec.replicates;
  j["mean_rho"] = mean_rho;
  j["csv"] = csv_path;
  auto& rows_json = j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"value", row.value},
                         {"replicate", row.replicate},
                         {"run_seed", row.run_seed},
                         {"graph_seed", row.graph_seed},
                         {"rho", row.rho},
                         {"iterations", row.iterations},
                         {"diverged", row.diverged},
                         {"final", record_to_json(row.final_record)}});
  }
  return j;
}

SweepResult run_sensitivity(const SweepSpec& sweep, const ExperimentConfig& base) {
  if (sweep.values.empty()) throw std::invalid_argument("sweep: values must be nonempty");
  if (sweep.replicates < 1) throw std::invalid_argument("sweep: replicates must be >= 1");
  const bool axis_ok = sweep.axis == "er_p" || sweep.axis == "M" || sweep.axis == "S1" ||
                       sweep.axis == "S2" || sweep.axis == "q" || sweep.axis == "eta_scale";
  if (!axis_ok) throw std::invalid_argument("sweep: unknown axis '" + sweep.axis + "'");
  validate_config(base);

  SweepResult result;
  result.spec = sweep;
  const std::int64_t total = static_cast<std::int64_t>(sweep.values.size()) * sweep.replicates;
  result.rows.resize(static_cast<std::size_t>(total));

  pool_run(total, [&](std::int64_t task) {
    const std::size_t v_idx = static_cast<std::size_t>(task) / sweep.replicates;
    const int rep = static_cast<int>(task % sweep.replicates);
    const double value = sweep.values[v_idx];

    ExperimentConfig derived = base;
    if (sweep.axis == "er_p") {
      derived.graph.kind = "er";
      derived.graph.p = value;
    } else if (sweep.axis == "M") {
      derived.problem.agents = static_cast<int>(value);
    } else if (sweep.axis == "S1") {
      derived.algorithm.s1 = static_cast<std::int64_t>(value);
    } else if (sweep.axis == "S2") {
      derived.algorithm.s2 = static_cast<std::int64_t>(value);
    } else if (sweep.axis == "q") {
      derived.algorithm.q = static_cast<std::int64_t>(value);
    } else {
      derived.algorithm.eta_scale = value;
    }

    SweepRow row;
    row.value = value;
    row.replicate = rep;
    row.graph_seed = rng::stream_key(base.graph.seed, rng::Purpose::SeedExpand, v_idx,
                                     static_cast<std::uint64_t>(rep));
    // Same run seed for replicate k across every axis value: paired draws.
    row.run_seed = rng::expand_seed(base.run.seeds.front(), static_cast<std::uint64_t>(rep));
    derived.graph.seed = row.graph_seed;
    derived.run.seeds = {row.run_seed};

    const auto problem = build_problem(derived.problem);
    const MixingMatrix mixing = build_graph(derived.graph, derived.problem.agents);
    row.rho = mixing.rho;
    const RunPlan plan = build_plan(derived, *problem, mixing, derived.algorithm.estimator);
    row.iterations = plan.T;
    const Eigen::MatrixXd Z0 = initial_point(derived.run, problem->agents(), problem->dim_z());
    const RunResult run_result =
        run(plan, *problem, mixing, Z0, row.run_seed, derived.run.log_every);
    row.diverged = run_result.diverged;
    row.final_record = run_result.records.back();
    result.rows[static_cast<std::size_t>(task)] = std::move(row);
  });

  result.mean_rho.resize(sweep.values.size(), 0.0);
  for (std::size_t v = 0; v < sweep.values.size(); ++v) {
    double acc = 0.0;
    for (int r = 0; r < sweep.replicates; ++r) {
      acc += result.rows[v * sweep.replicates + r].rho;
    }
    result.mean_rho[v] = acc / sweep.replicates;
  }

  CsvBuilder csv({"axis", "value", "replicate", "run_seed", "graph_seed", "rho", "iterations",
                  "oracle_calls", "comm_rounds", "final_stationarity", "final_consensus",
                  "final_dual_subopt", "final_est_error", "diverged"});
  for (const auto& row : result.rows) {
    csv.add_row({sweep.axis, format_double(row.value), std::to_string(row.replicate),
                 std::to_string(row.run_seed), std::to_string(row.graph_seed),
                 format_double(row.rho), std::to_string(row.iterations),
                 std::to_string(row.final_record.oracle_calls),
                 std::to_string(row.final_record.comm_rounds),
                 format_double(row.final_record.stationarity),
                 format_double(row.final_record.consensus),
                 format_double(row.final_record.dual_subopt),
                 format_double(row.final_record.est_error), row.diverged ? "1" : "0"});
  }
  result.csv_path = base.run.output + "/" + base.name + "_sweep_" + sweep.axis + ".csv";
  csv.write(result.csv_path);
  write_file_atomic(base.run.output + "/" + base.name + "_sweep_" + sweep.axis + "_summary.json",
                    result.to_json().dump(2) + "\n");
  return result;
}

}  // namespace decmm
