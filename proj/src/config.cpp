#include "mtd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace mtd {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse integer from '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used == value.size() && std::isfinite(out)) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': cannot parse number from '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["M"] = [](Config& c, auto& k, auto& v) { c.env.num_servers = parse_int(k, v); };
    t["delta"] = [](Config& c, auto& k, auto& v) { c.env.downtime = parse_int(k, v); };
    t["nu"] = [](Config& c, auto& k, auto& v) { c.env.miss_probability = parse_double(k, v); };
    t["alpha"] = [](Config& c, auto& k, auto& v) { c.env.knowledge_gain = parse_double(k, v); };
    t["c_a"] = [](Config& c, auto& k, auto& v) { c.env.probe_cost = parse_double(k, v); };
    t["theta_sl"] = [](Config& c, auto& k, auto& v) {
      c.env.theta_adversary.slope = c.env.theta_defender.slope = parse_double(k, v);
    };
    t["theta_th"] = [](Config& c, auto& k, auto& v) {
      c.env.theta_adversary.threshold = c.env.theta_defender.threshold = parse_double(k, v);
    };
    t["theta_sl_a"] = [](Config& c, auto& k, auto& v) { c.env.theta_adversary.slope = parse_double(k, v); };
    t["theta_th_a"] = [](Config& c, auto& k, auto& v) { c.env.theta_adversary.threshold = parse_double(k, v); };
    t["theta_sl_d"] = [](Config& c, auto& k, auto& v) { c.env.theta_defender.slope = parse_double(k, v); };
    t["theta_th_d"] = [](Config& c, auto& k, auto& v) { c.env.theta_defender.threshold = parse_double(k, v); };
    t["w_a"] = [](Config& c, auto& k, auto& v) { c.env.w_adversary = parse_double(k, v); };
    t["w_d"] = [](Config& c, auto& k, auto& v) { c.env.w_defender = parse_double(k, v); };
    t["utenv"] = [](Config& c, auto& k, auto& v) {
      const int index = parse_int(k, v);
      if (index < 0 || index > 3) throw ConfigError("key 'utenv': must be 0, 1, 2 or 3");
      std::tie(c.env.w_adversary, c.env.w_defender) = utility_environment(index);
    };
    t["T"] = [](Config& c, auto& k, auto& v) { c.env.horizon = parse_int(k, v); };
    t["gamma"] = [](Config& c, auto& k, auto& v) { c.env.gamma = parse_double(k, v); };
    t["charge_down_probe"] = [](Config& c, auto& k, auto& v) {
      c.env.charge_probe_on_down = parse_bool(k, v);
    };

    t["count_current_probe"] = [](Config& c, auto& k, auto& v) {
      c.env.count_current_probe = parse_bool(k, v);
    };
    t["p_a"] = [](Config& c, auto& k, auto& v) { c.heuristics.adversary_period = parse_int(k, v); };
    t["p_d"] = [](Config& c, auto& k, auto& v) { c.heuristics.defender_period = parse_int(k, v); };
    t["pcp_period"] = [](Config& c, auto& k, auto& v) { c.heuristics.pcp_period = parse_int(k, v); };
    t["pcp_threshold"] = [](Config& c, auto& k, auto& v) { c.heuristics.pcp_threshold = parse_int(k, v); };
    t["tau_a"] = [](Config& c, auto& k, auto& v) { c.heuristics.adversary_threshold = parse_double(k, v); };
    t["tau_d"] = [](Config& c, auto& k, auto& v) { c.heuristics.defender_threshold = parse_double(k, v); };
    t["ct_rho_plus_one"] = [](Config& c, auto& k, auto& v) { c.heuristics.ct_rho_plus_one = parse_bool(k, v); };

    t["ne"] = [](Config& c, auto& k, auto& v) { c.train.episodes = parse_int(k, v); };
    t["epsilon_fraction"] = [](Config& c, auto& k, auto& v) { c.train.epsilon_fraction = parse_double(k, v); };
    t["epsilon_final"] = [](Config& c, auto& k, auto& v) { c.train.epsilon_final = parse_double(k, v); };
    t["learning_rate"] = [](Config& c, auto& k, auto& v) { c.train.learning_rate = parse_double(k, v); };
    t["buffer_size"] = [](Config& c, auto& k, auto& v) { c.train.buffer_size = parse_int(k, v); };
    t["batch_size"] = [](Config& c, auto& k, auto& v) { c.train.batch_size = parse_int(k, v); };
    t["hidden"] = [](Config& c, auto& k, auto& v) { c.train.hidden = parse_int(k, v); };
    t["optimizer"] = [](Config& c, auto& k, auto& v) {
      if (v == "adam") {
        c.train.optimizer = OptimizerKind::kAdam;
      } else if (v == "sgd") {
        c.train.optimizer = OptimizerKind::kSgd;
      } else {
        throw ConfigError("key '" + k + "': expected adam or sgd, got '" + v + "'");
      }
    };
    t["target_update"] = [](Config& c, auto& k, auto& v) { c.train.target_update = parse_int(k, v); };

    t["eps_do"] = [](Config& c, auto& k, auto& v) { c.double_oracle.eps_do = parse_double(k, v); };
    t["max_iterations"] = [](Config& c, auto& k, auto& v) { c.double_oracle.max_iterations = parse_int(k, v); };
    t["eval_episodes"] = [](Config& c, auto& k, auto& v) { c.double_oracle.eval_episodes = parse_int(k, v); };
    t["require_both"] = [](Config& c, auto& k, auto& v) { c.double_oracle.require_both = parse_bool(k, v); };
    t["seed"] = [](Config& c, auto& k, auto& v) {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(v, &used);
        if (used == v.size()) return;
      } catch (const std::exception&) {
      }
      throw ConfigError("key '" + k + "': cannot parse seed from '" + v + "'");
    };
    return t;
  }();
  return table;
}

}  // namespace

void EnvConfig::validate() const {
  require(num_servers >= 1, "M must be >= 1");
  require(downtime >= 1, "delta must be >= 1");
  require(miss_probability >= 0.0 && miss_probability <= 1.0, "nu must lie in [0, 1]");
  require(knowledge_gain > 0.0, "alpha must be > 0");
  require(probe_cost >= 0.0, "c_a must be >= 0");
  require(w_adversary >= 0.0 && w_adversary <= 1.0, "w_a must lie in [0, 1]");
  require(w_defender >= 0.0 && w_defender <= 1.0, "w_d must lie in [0, 1]");
  require(horizon >= 1, "T must be >= 1");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  for (double v : {theta_adversary.slope, theta_adversary.threshold, theta_defender.slope,
                   theta_defender.threshold, probe_cost, knowledge_gain}) {
    require(std::isfinite(v), "model parameters must be finite");
  }
}

void HeuristicParams::validate() const {
  require(adversary_period >= 1, "p_a must be >= 1");
  require(defender_period >= 1, "p_d must be >= 1");
  require(pcp_period >= 1, "pcp_period must be >= 1");
  require(pcp_threshold >= 0, "pcp_threshold must be >= 0");
  require(adversary_threshold >= 0.0 && adversary_threshold <= 1.0, "tau_a must lie in [0, 1]");
  require(defender_threshold >= 0.0 && defender_threshold <= 1.0, "tau_d must lie in [0, 1]");
}

void TrainConfig::validate() const {
  require(episodes >= 1, "ne must be >= 1");
  require(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0, "epsilon_fraction must lie in (0, 1]");
  require(epsilon_final >= 0.0 && epsilon_final <= 1.0, "epsilon_final must lie in [0, 1]");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(buffer_size >= batch_size, "buffer_size must be >= batch_size");
  require(hidden >= 1, "hidden must be >= 1");
  require(target_update >= 0, "target_update must be >= 0");
}

void DoConfig::validate() const {
  require(eps_do >= 0.0 && std::isfinite(eps_do), "eps_do must be finite and >= 0");
  require(max_iterations >= 0, "max_iterations must be >= 0");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
}

void Config::validate() const {
  env.validate();
  heuristics.validate();
  train.validate();
  double_oracle.validate();
}

std::pair<double, double> utility_environment(int index) {
  switch (index) {
    case 0: return {1.0, 1.0};  // control / availability
    case 1: return {1.0, 0.0};  // control / confidentiality
    case 2: return {0.0, 1.0};  // disrupt / availability
    case 3: return {0.0, 0.0};  // disrupt / confidentiality
    default: throw ConfigError("utility environment must be 0..3");
  }
}

void apply_config_key(Config& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

Config parse_config(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_config_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::map<std::string, std::string> config_entries(const Config& c) {
  std::map<std::string, std::string> e;
  e["M"] = std::to_string(c.env.num_servers);
  e["delta"] = std::to_string(c.env.downtime);
  e["nu"] = fmt_double(c.env.miss_probability);
  e["alpha"] = fmt_double(c.env.knowledge_gain);
  e["c_a"] = fmt_double(c.env.probe_cost);
  e["theta_sl_a"] = fmt_double(c.env.theta_adversary.slope);
  e["theta_th_a"] = fmt_double(c.env.theta_adversary.threshold);
  e["theta_sl_d"] = fmt_double(c.env.theta_defender.slope);
  e["theta_th_d"] = fmt_double(c.env.theta_defender.threshold);
  e["w_a"] = fmt_double(c.env.w_adversary);
  e["w_d"] = fmt_double(c.env.w_defender);
  e["T"] = std::to_string(c.env.horizon);
  e["gamma"] = fmt_double(c.env.gamma);
  e["charge_down_probe"] = c.env.charge_probe_on_down ? "true" : "false";
  e["count_current_probe"] = c.env.count_current_probe ? "true" : "false";
  e["p_a"] = std::to_string(c.heuristics.adversary_period);
  e["p_d"] = std::to_string(c.heuristics.defender_period);
  e["pcp_period"] = std::to_string(c.heuristics.pcp_period);
  e["pcp_threshold"] = std::to_string(c.heuristics.pcp_threshold);
  e["tau_a"] = fmt_double(c.heuristics.adversary_threshold);
  e["tau_d"] = fmt_double(c.heuristics.defender_threshold);
  e["ct_rho_plus_one"] = c.heuristics.ct_rho_plus_one ? "true" : "false";
  e["ne"] = std::to_string(c.train.episodes);
  e["epsilon_fraction"] = fmt_double(c.train.epsilon_fraction);
  e["epsilon_final"] = fmt_double(c.train.epsilon_final);
  e["learning_rate"] = fmt_double(c.train.learning_rate);
  e["buffer_size"] = std::to_string(c.train.buffer_size);
  e["batch_size"] = std::to_string(c.train.batch_size);
  e["hidden"] = std::to_string(c.train.hidden);
  e["optimizer"] = c.train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  e["target_update"] = std::to_string(c.train.target_update);
  e["eps_do"] = fmt_double(c.double_oracle.eps_do);
  e["max_iterations"] = std::to_string(c.double_oracle.max_iterations);
  e["eval_episodes"] = std::to_string(c.double_oracle.eval_episodes);
  e["require_both"] = c.double_oracle.require_both ? "true" : "false";
  e["seed"] = std::to_string(c.seed);
  return e;
}

std::string format_config(const Config& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + "=" + v + "\n";
  return out;
}

}  // namespace mtd
