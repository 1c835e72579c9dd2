#include "decmm/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace decmm {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

nlohmann::json parse_scalar(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  if (v.empty()) throw config_error(where + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw config_error(where + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw config_error(where + ": cannot parse value '" + v + "'");
}

}  // namespace

nlohmann::json toml_subset_to_json(const std::string& text, const std::string& origin) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* section = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw config_error(where + ": malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw config_error(where + ": empty section name");
      section = &root;
      std::istringstream parts(name);
      std::string part;
      while (std::getline(parts, part, '.')) {
        part = trim(part);
        if (part.empty()) throw config_error(where + ": malformed section name");
        section = &(*section)[part];
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error(where + ": empty key");

    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') throw config_error(where + ": unterminated array");
      nlohmann::json arr = nlohmann::json::array();
      std::string body = value.substr(1, value.size() - 2);
      std::string item;
      std::istringstream items(body);
      while (std::getline(items, item, ',')) {
        if (trim(item).empty()) continue;
        arr.push_back(parse_scalar(item, where));
      }
      (*section)[key] = arr;
    } else {
      (*section)[key] = parse_scalar(value, where);
    }
  }
  return root;
}

namespace {

// Pulls known keys and rejects unknown ones, so typos surface with paths.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected a table");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.is_object()) return;
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.push_back(key);
    try {
      out = it->get<T>();
    } catch (const std::exception&) {
      errors_.push_back(path_ + "." + key + ": wrong type");
    }
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      bool known = false;
      for (const auto& s : seen_) {
        if (s == key) {
          known = true;
          break;
        }
      }
      if (!known) errors_.push_back(path_ + "." + key + ": unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

ExperimentConfig config_from_json(const nlohmann::json& root, const std::string& origin) {
  std::vector<std::string> errors;
  ExperimentConfig config;

  if (root.contains("preset")) {
    config = preset_config(root.at("preset").get<std::string>());
  }
  if (root.contains("name")) config.name = root.at("name").get<std::string>();

  if (root.contains("problem")) {
    SectionReader r(root.at("problem"), "problem", errors);
    r.get("kind", config.problem.kind);
    r.get("agents", config.problem.agents);
    r.get("samples", config.problem.samples);
    r.get("dim", config.problem.dim);
    r.get("alpha", config.problem.alpha);
    r.get("data_seed", config.problem.data_seed);
    r.get("dataset", config.problem.dataset);
    r.get("d_cap", config.problem.d_cap);
    r.finish();
  }
  if (root.contains("graph")) {
    SectionReader r(root.at("graph"), "graph", errors);
    r.get("kind", config.graph.kind);
    r.get("p", config.graph.p);
    r.get("seed", config.graph.seed);
    r.finish();
  }
  if (root.contains("algorithm")) {
    SectionReader r(root.at("algorithm"), "algorithm", errors);
    r.get("estimator", config.algorithm.estimator);
    r.get("stepsize", config.algorithm.stepsize);
    r.get("eta_x", config.algorithm.eta_x);
    r.get("eta_y", config.algorithm.eta_y);
    r.get("eta_scale", config.algorithm.eta_scale);
    r.get("s1", config.algorithm.s1);
    r.get("s2", config.algorithm.s2);
    r.get("q", config.algorithm.q);
    r.get("beta", config.algorithm.beta);
    r.get("beta_mode", config.algorithm.beta_mode);
    r.get("storm_c", config.algorithm.storm_c);
    r.finish();
  }
  if (root.contains("run")) {
    SectionReader r(root.at("run"), "run", errors);
    r.get("iterations", config.run.iterations);
    r.get("epochs", config.run.epochs);
    r.get("seeds", config.run.seeds);
    r.get("log_every", config.run.log_every);
    r.get("output", config.run.output);
    r.get("z0_scale", config.run.z0_scale);
    r.get("z0_seed", config.run.z0_seed);
    r.get("z0_consensus", config.run.z0_consensus);
    r.finish();
  }
  for (const auto& [key, value] : root.items()) {
    (void)value;
    if (key != "preset" && key != "name" && key != "problem" && key != "graph" &&
        key != "algorithm" && key != "run") {
      errors.push_back(key + ": unknown section");
    }
  }

  if (!errors.empty()) {
    std::string msg = origin + ": invalid config";
    for (const auto& e : errors) msg += "\n  " + e;
    throw config_error(msg);
  }
  return config;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  const std::string body = trim(text);
  nlohmann::json root;
  if (!body.empty() && body.front() == '{') {
    root = nlohmann::json::parse(body, nullptr, true, true);
  } else {
    root = toml_subset_to_json(text, origin);
  }
  return config_from_json(root, origin);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_config(const ExperimentConfig& config) {
  std::vector<std::string> errors;

  const auto& p = config.problem;
  if (p.kind != "pl-game" && p.kind != "robust-lr") {
    errors.push_back("problem.kind: unknown '" + p.kind + "'");
  }
  if (p.agents < 1) errors.push_back("problem.agents: must be >= 1");
  if (!(p.alpha > 0.0)) errors.push_back("problem.alpha: must be positive");
  if (p.kind == "pl-game") {
    if (p.dim < 2) errors.push_back("problem.dim: must be >= 2");
    if (p.samples < p.dim) errors.push_back("problem.samples: must be >= dim");
  }
  if (p.kind == "robust-lr") {
    if (p.dataset.empty()) {
      if (p.samples < 1 || p.dim < 1) {
        errors.push_back("problem.samples/problem.dim: synthetic data needs positive sizes");
      }
    } else if (!std::filesystem::exists(p.dataset)) {
      errors.push_back("problem.dataset: file '" + p.dataset + "' does not exist");
    }
  }

  const auto& g = config.graph;
  if (g.kind == "ring") {
    if (p.agents < 3) errors.push_back("graph.kind: ring requires problem.agents >= 3");
  } else if (g.kind == "er") {
    if (!(g.p > 0.0) || g.p > 1.0) errors.push_back("graph.p: must lie in (0, 1]");
    if (p.agents < 2) errors.push_back("graph.kind: er requires problem.agents >= 2");
  } else {
    errors.push_back("graph.kind: unknown '" + g.kind + "'");
  }

  const auto& a = config.algorithm;
  if (a.estimator != "spider" && a.estimator != "sgd" && a.estimator != "storm" &&
      a.estimator != "exact") {
    errors.push_back("algorithm.estimator: unknown '" + a.estimator + "'");
  }
  if (a.stepsize == "manual") {
    if (!(a.eta_x > 0.0) || !(a.eta_y > 0.0)) {
      errors.push_back("algorithm.eta_x/eta_y: manual step sizes must be positive");
    }
  } else if (a.stepsize != "theorem") {
    errors.push_back("algorithm.stepsize: unknown '" + a.stepsize + "'");
  }
  if (a.s1 < 1 || a.s2 < 1 || a.q < 1) errors.push_back("algorithm.s1/s2/q: must be >= 1");
  if (a.beta < 0.0 || a.beta > 1.0) errors.push_back("algorithm.beta: must lie in [0, 1]");
  if (a.beta_mode != "constant" && a.beta_mode != "auto") {
    errors.push_back("algorithm.beta_mode: unknown '" + a.beta_mode + "'");
  }
  if (!(a.eta_scale > 0.0)) errors.push_back("algorithm.eta_scale: must be positive");

  const auto& r = config.run;
  const bool has_iters = r.iterations >= 0;
  const bool has_epochs = r.epochs > 0.0;
  if (has_iters == has_epochs) {
    errors.push_back("run.iterations/run.epochs: set exactly one");
  }
  if (r.seeds.empty()) errors.push_back("run.seeds: must be nonempty");
  if (r.log_every < 0) errors.push_back("run.log_every: must be >= 0");
  if (r.output.empty()) errors.push_back("run.output: must be nonempty");
  if (!(r.z0_scale >= 0.0)) errors.push_back("run.z0_scale: must be >= 0");

  if (!errors.empty()) {
    std::string msg = "invalid config";
    for (const auto& e : errors) msg += "\n  " + e;
    throw config_error(msg);
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["problem"] = {{"kind", problem.kind},   {"agents", problem.agents},
                  {"samples", problem.samples}, {"dim", problem.dim},
                  {"alpha", problem.alpha}, {"data_seed", problem.data_seed},
                  {"dataset", problem.dataset}, {"d_cap", problem.d_cap}};
  j["graph"] = {{"kind", graph.kind}, {"p", graph.p}, {"seed", graph.seed}};
  j["algorithm"] = {{"estimator", algorithm.estimator}, {"stepsize", algorithm.stepsize},
                    {"eta_x", algorithm.eta_x},         {"eta_y", algorithm.eta_y},
                    {"eta_scale", algorithm.eta_scale}, {"s1", algorithm.s1},
                    {"s2", algorithm.s2},               {"q", algorithm.q},
                    {"beta", algorithm.beta},           {"beta_mode", algorithm.beta_mode},
                    {"storm_c", algorithm.storm_c}};
  j["run"] = {{"iterations", run.iterations}, {"epochs", run.epochs},
              {"seeds", run.seeds},           {"log_every", run.log_every},
              {"output", run.output},         {"z0_scale", run.z0_scale},
              {"z0_seed", run.z0_seed},       {"z0_consensus", run.z0_consensus}};
  return j;
}

std::string ExperimentConfig::hash() const {
  const std::string dump = to_json().dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig config;
  config.name = name;
  if (name == "pl-game") {
    config.problem = {"pl-game", 8, 1000, 25, 1.0, 7, "", 0};
    config.graph = {"ring", 0.5, 1};
    config.algorithm.estimator = "spider";
    config.algorithm.stepsize = "theorem";
    config.algorithm.eta_scale = 400.0;
    config.algorithm.s1 = 100;
    config.algorithm.s2 = 1;
    config.algorithm.q = 100;
    config.run.epochs = 50.0;
    config.run.iterations = -1;
    config.run.seeds = {1, 2, 3, 4, 5};
    config.run.log_every = 250;
    config.run.output = "out/pl-game";
    return config;
  }
  if (name == "robust-lr-a9a" || name == "robust-lr-ijcnn1") {
    config.problem = {"robust-lr", 20, 0, 0, 1.0, 7,
                      name == "robust-lr-a9a" ? "data/a9a" : "data/ijcnn1", 0};
    config.graph = {"ring", 0.5, 1};
    config.algorithm.estimator = "spider";
    // tuned from the grid; the theorem coupling eta_x = eta_y/(64 kappa^2) is
    // impractically small at this problem's curvature scale
    config.algorithm.stepsize = "manual";
    config.algorithm.eta_y = 1e-2;
    config.algorithm.eta_x = 1e-3;
    config.algorithm.s1 = 1000;
    config.algorithm.s2 = 32;
    config.algorithm.q = 32;
    config.run.iterations = 5000;
    config.run.epochs = -1.0;
    config.run.seeds = {1, 2, 3};
    config.run.log_every = 100;
    config.run.output = "out/" + name;
    return config;
  }
  throw config_error("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"pl-game", "robust-lr-a9a", "robust-lr-ijcnn1"};
}

}  // namespace decmm
