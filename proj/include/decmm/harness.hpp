#pragma once

#include <memory>
#include <string>
#include <vector>

#include "decmm/config.hpp"
#include "decmm/optimizer.hpp"

namespace decmm {

std::unique_ptr<MinimaxProblem> build_problem(const ProblemSpec& spec);
MixingMatrix build_graph(const GraphSpec& spec, int agents);
Eigen::MatrixXd initial_point(const RunSpec& spec, int M, int dz);

// Step sizes, schedule, and horizon resolved for the given estimator name.
RunPlan build_plan(const ExperimentConfig& config, const MinimaxProblem& problem,
                   const MixingMatrix& mixing, const std::string& estimator);

// Non-fatal config advisories (e.g. s2 < q on a SPIDER run).
std::vector<std::string> config_warnings(const ExperimentConfig& config);

struct RunArtifact {
  std::uint64_t seed = 0;
  std::string csv_path;
  MetricsRecord final_record;
  std::int64_t tau = 0;
  std::int64_t iterations = 0;
  bool diverged = false;
  std::int64_t diverged_t = -1;
};

struct ExperimentSummary {
  std::string config_hash;
  std::string name;
  std::string method;
  std::int64_t iterations = 0;
  std::vector<RunArtifact> runs;
  double median_final_stationarity = 0.0;
  double iqr_final_stationarity = 0.0;
  double median_final_consensus = 0.0;
  double median_final_dual = 0.0;
  std::int64_t total_oracle_calls = 0;
  std::int64_t total_comm_rounds = 0;

  nlohmann::json to_json() const;
};

// One CSV per seed plus <name>_<method>_summary.json under run.output.
ExperimentSummary run_experiment(const ExperimentConfig& config);

struct CompareReport {
  std::vector<std::string> methods;
  std::int64_t budget_per_agent = 0;  // matched oracle draws
  std::vector<ExperimentSummary> summaries;
  std::vector<std::vector<int>> wins;  // wins[a][b]: seeds where a beats b
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Runs every method at the smallest common oracle budget and ranks them by
// median final stationarity. Requires >= 2 methods.
CompareReport compare_methods(const ExperimentConfig& config,
                              const std::vector<std::string>& methods);

struct SweepRow {
  double value = 0.0;
  int replicate = 0;
  std::uint64_t run_seed = 0;
  std::uint64_t graph_seed = 0;
  double rho = 0.0;
  std::int64_t iterations = 0;
  MetricsRecord final_record;
  bool diverged = false;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRow> rows;
  std::vector<double> mean_rho;  // aligned with spec.values
  std::string csv_path;

  nlohmann::json to_json() const;
};

// Long-format sweep over one axis; replicates share run seeds across values
// so per-replicate comparisons are paired.
SweepResult run_sensitivity(const SweepSpec& sweep, const ExperimentConfig& base);

void write_trajectory_csv(const std::string& path, const std::vector<MetricsRecord>& records,
                          bool with_best_response);
std::vector<std::string> trajectory_columns(bool with_best_response);

}  // namespace decmm
