#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "decmm/csv.hpp"
#include "decmm/harness.hpp"
#include "decmm/parallel.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string output;
  std::string graph;
  double er_p = -1.0;
  int agents = 0;
  std::int64_t graph_seed = -1;
  std::string dataset;
  std::string seeds;
  std::int64_t iterations = -2;
  double epochs = -1.0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* positional = cmd->add_option("config", opts.config_path, "config file (TOML or JSON)");
  if (config_required) positional->check(CLI::ExistingFile);
  cmd->add_option("--preset", opts.preset, "start from a named preset");
  cmd->add_option("--out", opts.output, "output directory override");
  cmd->add_option("--graph", opts.graph, "graph kind override: ring | er");
  cmd->add_option("--er-p", opts.er_p, "Erdos-Renyi edge probability");
  cmd->add_option("--agents", opts.agents, "agent count override");
  cmd->add_option("--graph-seed", opts.graph_seed, "graph seed override");
  cmd->add_option("--data", opts.dataset, "dataset path override (robust-lr)");
  cmd->add_option("--seeds", opts.seeds, "comma-separated run seeds");
  cmd->add_option("--iters", opts.iterations, "iteration budget override");
  cmd->add_option("--epochs", opts.epochs, "epoch budget override");
  cmd->add_option("--threads", opts.threads, "worker threads for parallel kernels (1 = serial)");
}

decmm::ExperimentConfig resolve_config(const CommonOpts& opts) {
  decmm::ExperimentConfig config;
  if (!opts.config_path.empty() && !opts.preset.empty()) {
    throw decmm::config_error("--preset conflicts with a config file; set preset inside the file");
  }
  if (!opts.config_path.empty()) {
    config = decmm::load_config(opts.config_path);
  } else if (!opts.preset.empty()) {
    config = decmm::preset_config(opts.preset);
  } else {
    throw decmm::config_error("provide a config file or --preset");
  }
  if (!opts.output.empty()) config.run.output = opts.output;
  if (!opts.graph.empty()) config.graph.kind = opts.graph;
  if (opts.er_p >= 0.0) config.graph.p = opts.er_p;
  if (opts.agents > 0) config.problem.agents = opts.agents;
  if (opts.graph_seed >= 0) config.graph.seed = static_cast<std::uint64_t>(opts.graph_seed);
  if (!opts.dataset.empty()) config.problem.dataset = opts.dataset;
  if (opts.iterations >= -1) {
    config.run.iterations = opts.iterations;
    if (opts.iterations >= 0) config.run.epochs = -1.0;
  }
  if (opts.epochs > 0.0) {
    config.run.epochs = opts.epochs;
    config.run.iterations = -1;
  }
  if (!opts.seeds.empty()) {
    config.run.seeds.clear();
    std::istringstream in(opts.seeds);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      if (!tok.empty()) config.run.seeds.push_back(std::stoull(tok));
    }
  }
  decmm::set_num_threads(opts.threads);
  return config;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

void print_warnings(const decmm::ExperimentConfig& config) {
  for (const auto& w : decmm::config_warnings(config)) {
    std::cerr << "warning: " << w << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decmm: decentralized minimax optimization experiments"};
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, compare_opts;

  auto* run_cmd = app.add_subcommand("run", "run one experiment config");
  add_common(run_cmd, run_opts, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "sensitivity sweep over one axis");
  add_common(sweep_cmd, sweep_opts, false);
  std::string axis, values_str;
  int replicates = 15;
  sweep_cmd->add_option("--axis", axis, "er_p | M | S1 | S2 | q | eta_scale")->required();
  sweep_cmd->add_option("--values", values_str, "comma-separated axis values")->required();
  sweep_cmd->add_option("--replicates", replicates, "replicates per value");

  auto* compare_cmd = app.add_subcommand("compare", "compare estimators at matched oracle budget");
  add_common(compare_cmd, compare_opts, false);
  std::string methods_str;
  compare_cmd->add_option("--methods", methods_str, "comma-separated estimator list")->required();

  auto* graph_cmd = app.add_subcommand("validate-graph", "check mixing-matrix properties");
  std::string graph_spec_path, graph_kind = "ring", weights = "metropolis", graph_out;
  int graph_agents = 8;
  double graph_p = 0.5;
  std::int64_t graph_seed = 1;
  graph_cmd->add_option("spec", graph_spec_path, "graph JSON file")->check(CLI::ExistingFile);
  graph_cmd->add_option("--graph", graph_kind, "ring | er");
  graph_cmd->add_option("--agents", graph_agents, "agent count");
  graph_cmd->add_option("--er-p", graph_p, "edge probability");
  graph_cmd->add_option("--graph-seed", graph_seed, "generation seed");
  graph_cmd->add_option("--weights", weights, "weight scheme for generated graphs");
  graph_cmd->add_option("--out", graph_out, "write the matrix as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto config = resolve_config(run_opts);
      decmm::validate_config(config);
      print_warnings(config);
      const auto summary = decmm::run_experiment(config);
      std::cout << summary.to_json().dump(2) << "\n";
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const auto config = resolve_config(sweep_opts);
      print_warnings(config);
      decmm::SweepSpec spec;
      spec.axis = axis;
      spec.replicates = replicates;
      for (const auto& v : split_csv(values_str)) spec.values.push_back(std::stod(v));
      const auto result = decmm::run_sensitivity(spec, config);
      std::cout << "wrote " << result.csv_path << "\n";
      for (std::size_t i = 0; i < spec.values.size(); ++i) {
        std::cout << axis << "=" << spec.values[i] << "  mean rho " << result.mean_rho[i] << "\n";
      }
      return 0;
    }
    if (compare_cmd->parsed()) {
      const auto config = resolve_config(compare_opts);
      print_warnings(config);
      const auto report = decmm::compare_methods(config, split_csv(methods_str));
      std::cout << report.to_json().dump(2) << "\n";
      return 0;
    }
    if (graph_cmd->parsed()) {
      decmm::MixingMatrix mixing;
      if (!graph_spec_path.empty()) {
        std::ifstream in(graph_spec_path);
        nlohmann::json j;
        in >> j;
        mixing = decmm::MixingMatrix::from_json(j);
      } else if (graph_kind == "ring") {
        mixing = decmm::build_ring(graph_agents);
      } else if (graph_kind == "er") {
        const auto topo = decmm::erdos_renyi(graph_agents, graph_p,
                                             static_cast<std::uint64_t>(graph_seed));
        if (weights != "metropolis") {
          throw std::invalid_argument("unknown weight scheme '" + weights + "'");
        }
        mixing = decmm::metropolis_weights(topo);
      } else {
        throw std::invalid_argument("unknown graph kind '" + graph_kind + "'");
      }
      const auto report = decmm::validate(mixing);
      std::cout << report.str() << "\n";
      if (!graph_out.empty()) {
        decmm::write_file_atomic(graph_out, mixing.to_json().dump(2) + "\n");
        std::cout << "wrote " << graph_out << "\n";
      }
      return report.pass() ? 0 : 2;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
