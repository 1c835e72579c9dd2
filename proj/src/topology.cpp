#include "decmm/topology.hpp"

#include <algorithm>
#include <numeric>

#include "decmm/rng.hpp"

namespace decmm {

namespace {

void normalize_edges(Topology& t) {
  for (auto& e : t.edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
    if (e.first == e.second) throw std::invalid_argument("topology: self-loop edge");
    if (e.first < 0 || e.second >= t.M) throw std::invalid_argument("topology: edge out of range");
  }
  std::sort(t.edges.begin(), t.edges.end());
  t.edges.erase(std::unique(t.edges.begin(), t.edges.end()), t.edges.end());
}

}  // namespace

bool Topology::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

std::vector<int> Topology::degrees() const {
  std::vector<int> deg(M, 0);
  for (const auto& [i, j] : edges) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

bool Topology::connected() const {
  if (M <= 0) return false;
  if (M == 1) return true;
  std::vector<std::vector<int>> adj(M);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<char> seen(M, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == M;
}

nlohmann::json Topology::to_json() const {
  nlohmann::json j;
  j["M"] = M;
  auto& arr = j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges) arr.push_back({a, b});
  return j;
}

Topology Topology::from_json(const nlohmann::json& j) {
  Topology t;
  t.M = j.at("M").get<int>();
  if (t.M <= 0) throw std::invalid_argument("topology: M must be positive");
  for (const auto& e : j.at("edges")) {
    t.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  }
  normalize_edges(t);
  return t;
}

Topology ring_topology(int M) {
  if (M < 3) throw std::invalid_argument("ring topology requires M >= 3");
  Topology t;
  t.M = M;
  for (int i = 0; i < M; ++i) t.edges.emplace_back(i, (i + 1) % M);
  normalize_edges(t);
  return t;
}

Topology complete_topology(int M) {
  if (M < 2) throw std::invalid_argument("complete topology requires M >= 2");
  Topology t;
  t.M = M;
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j) t.edges.emplace_back(i, j);
  return t;
}

Topology erdos_renyi(int M, double p, std::uint64_t seed, const ErdosRenyiOptions& opts) {
  if (M < 2) throw std::invalid_argument("erdos_renyi: M must be >= 2");
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("erdos_renyi: p must be in (0, 1]");

  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    rng::Stream stream(seed, rng::Purpose::GraphGen, static_cast<std::uint64_t>(attempt));
    Topology t;
    t.M = M;
    for (int i = 0; i < M; ++i)
      for (int j = i + 1; j < M; ++j)
        if (stream.next_double() < p) t.edges.emplace_back(i, j);
    if (t.connected()) return t;

    if (attempt == opts.max_retries) {
      if (!opts.path_fallback) {
        throw generation_error("erdos_renyi: retry budget exhausted and path fallback disabled");
      }
      // Union with a random Hamiltonian path to force connectivity.
      std::vector<int> order(M);
      std::iota(order.begin(), order.end(), 0);
      for (int i = M - 1; i > 0; --i) {
        const auto k = stream.uniform_below(i + 1);
        std::swap(order[i], order[k]);
      }
      for (int i = 0; i + 1 < M; ++i) t.edges.emplace_back(order[i], order[i + 1]);
      normalize_edges(t);
      return t;
    }
  }
  throw generation_error("erdos_renyi: unreachable");
}

}  // namespace decmm
