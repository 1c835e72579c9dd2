#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace decmm {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  std::string kind = "pl-game";  // pl-game | robust-lr
  int agents = 8;
  std::int64_t samples = 1000;  // per agent (generated problems)
  int dim = 25;
  double alpha = 1.0;
  std::uint64_t data_seed = 7;
  std::string dataset;  // robust-lr: LIBSVM file path
  int d_cap = 0;
};

struct GraphSpec {
  std::string kind = "ring";  // ring | er
  double p = 0.5;
  std::uint64_t seed = 1;
};

struct AlgorithmSpec {
  std::string estimator = "spider";  // spider | sgd | storm | exact
  std::string stepsize = "theorem";  // theorem | manual
  double eta_x = 0.0;
  double eta_y = 0.0;
  double eta_scale = 1.0;
  std::int64_t s1 = 100;
  std::int64_t s2 = 1;
  std::int64_t q = 100;
  std::string beta_mode = "constant";  // constant | auto (beta = min(1, c eta_y^2))
  double beta = 0.1;
  double storm_c = 100.0;
};

struct RunSpec {
  std::int64_t iterations = -1;  // exactly one of iterations / epochs is set
  double epochs = -1.0;
  std::vector<std::uint64_t> seeds = {1};
  std::int64_t log_every = 100;
  std::string output = "out";
  double z0_scale = 1.0;
  std::uint64_t z0_seed = 1;
  bool z0_consensus = false;  // true: all agents start at the same point
};

struct ExperimentConfig {
  std::string name = "run";
  ProblemSpec problem;
  GraphSpec graph;
  AlgorithmSpec algorithm;
  RunSpec run;

  nlohmann::json to_json() const;
  std::string hash() const;
};

// Sensitivity sweep over one axis.
struct SweepSpec {
  std::string axis;  // er_p | M | S1 | S2 | q | eta_scale
  std::vector<double> values;
  int replicates = 15;
};

// Named presets: pl-game, robust-lr-a9a, robust-lr-ijcnn1.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// TOML (subset: [sections], key = value scalars and flat arrays, # comments)
// or JSON, sniffed from the content.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);

// Throws config_error listing every violated field by path.
void validate_config(const ExperimentConfig& config);

nlohmann::json toml_subset_to_json(const std::string& text, const std::string& origin);

}  // namespace decmm
