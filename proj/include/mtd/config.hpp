#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace mtd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SigmoidParams {
  double slope = 5.0;
  double threshold = 0.2;
};

/// Model parameters of the server game. Defaults are the baseline
/// experimental values with the "disrupt / availability" utility weights.
struct EnvConfig {
  int num_servers = 10;          // M
  int downtime = 7;              // steps a reimaged server stays offline
  double miss_probability = 0.0; // chance the defender misses a probe
  double knowledge_gain = 0.05;  // alpha in 1 - exp(-alpha (rho + 1))
  double probe_cost = 0.2;       // C_A
  SigmoidParams theta_adversary;
  SigmoidParams theta_defender;
  double w_adversary = 0.0;
  double w_defender = 1.0;
  int horizon = 1000;            // T
  double gamma = 0.99;
  // Probing a server that is already down still costs C_A.
  bool charge_probe_on_down = true;
  // A probe's success chance is 1 - exp(-alpha (rho + 1)) with rho counting
  // this probe (true) or only the earlier ones (false).
  bool count_current_probe = true;

  void validate() const;
};

/// Parameters shared by the hand-written strategies.
struct HeuristicParams {
  int adversary_period = 1;          // P_A
  int defender_period = 4;           // P_D
  int pcp_period = 4;                // P of Probe-Count-or-Period
  int pcp_threshold = 7;             // pi
  double adversary_threshold = 0.5;  // tau for Control-Threshold adversary
  double defender_threshold = 0.8;   // tau for Control-Threshold defender
  // Control-Threshold defender: estimate the last probe's success with
  // exponent alpha*rho (false) or alpha*(rho+1) (true).
  bool ct_rho_plus_one = false;

  void validate() const;
};

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  int episodes = 500;  // N_e
  double epsilon_fraction = 0.2;
  double epsilon_final = 0.02;
  double learning_rate = 0.0005;
  int buffer_size = 5000;
  int batch_size = 32;
  int hidden = 32;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // 0 disables the target network; otherwise copy the online net every N updates.
  int target_update = 0;

  void validate() const;
};

struct DoConfig {
  double eps_do = 1.0;
  int max_iterations = 10;  // double-oracle rounds; each round is two oracle calls
  int eval_episodes = 50;
  bool require_both = true;

  void validate() const;
};

struct Config {
  EnvConfig env;
  HeuristicParams heuristics;
  TrainConfig train;
  DoConfig double_oracle;
  std::uint64_t seed = 0;

  void validate() const;
};

/// (w_a, w_d) for utility environments 0..3.
std::pair<double, double> utility_environment(int index);

/// Applies one `key=value` assignment; throws ConfigError naming the key.
void apply_config_key(Config& config, const std::string& key, const std::string& value);

/// Parses `key=value` lines ('#' starts a comment). Missing keys keep the
/// baseline defaults; unknown keys and invalid values are errors.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Canonical, fully resolved key/value listing that parse_config reads back.
std::map<std::string, std::string> config_entries(const Config& config);
std::string format_config(const Config& config);

}  // namespace mtd
