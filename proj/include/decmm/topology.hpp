#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace decmm {

// Thrown when random graph generation cannot produce a connected topology.
struct generation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Undirected communication graph on agents {0, ..., M-1}. Self-loops are
// implicit; the edge list stores unordered pairs (i, j) with i < j, sorted
// and de-duplicated.
struct Topology {
  int M = 0;
  std::vector<std::pair<int, int>> edges;

  bool has_edge(int i, int j) const;
  std::vector<int> degrees() const;
  bool connected() const;

  nlohmann::json to_json() const;
  static Topology from_json(const nlohmann::json& j);
};

// Cycle graph 0-1-...-(M-1)-0. For M == 3 this is the triangle.
Topology ring_topology(int M);
Topology complete_topology(int M);

struct ErdosRenyiOptions {
  int max_retries = 100;
  bool path_fallback = true;  // union a random Hamiltonian path when retries run out
};

// Each pair joined independently with probability p; redraws until connected,
// then falls back to adding a random spanning path (unless disabled, in which
// case a generation_error is thrown).
Topology erdos_renyi(int M, double p, std::uint64_t seed, const ErdosRenyiOptions& opts = {});

}  // namespace decmm
