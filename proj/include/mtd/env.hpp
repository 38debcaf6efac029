#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mtd/config.hpp"
#include "mtd/rng.hpp"

namespace mtd {

enum class Player { kAdversary, kDefender };

inline const char* player_name(Player p) {
  return p == Player::kAdversary ? "adversary" : "defender";
}
Player parse_player(std::string_view name);

/// No action, or the index of the server to probe / reimage.
struct Action {
  std::optional<int> target;

  static Action noop() { return {}; }
  static Action at(int server) { return {server}; }
  bool is_noop() const { return !target.has_value(); }
  friend bool operator==(const Action&, const Action&) = default;
};

/// Network action encoding: 0 is no-op, i+1 targets server i.
inline int action_index(const Action& a) { return a.target ? *a.target + 1 : 0; }
inline Action action_from_index(int index) {
  return index == 0 ? Action::noop() : Action::at(index - 1);
}

struct ServerState {
  int probes = 0;  // rho
  Player controller = Player::kDefender;
  std::optional<int> reimaged_at;  // set while the server is down

  bool up() const { return !reimaged_at.has_value(); }
};

inline constexpr int kObsFields = 5;

/// Per-server observation tuples, flattened server-major.
/// Adversary: status, time_to_up, progress, control, time_since_last_probe.
/// Defender: status, time_to_up, progress, time_since_last_probe,
/// time_since_last_reimage.
struct Observation {
  Player player = Player::kAdversary;
  std::vector<int> values;

  int num_servers() const { return static_cast<int>(values.size()) / kObsFields; }
  int field(int server, int index) const { return values[server * kObsFields + index]; }
  int status(int server) const { return field(server, 0); }
  int time_to_up(int server) const { return field(server, 1); }
  int progress(int server) const { return field(server, 2); }
  // Adversary only.
  int control(int server) const { return field(server, 3); }
  int adversary_time_since_probe(int server) const { return field(server, 4); }
  // Defender only.
  int defender_time_since_probe(int server) const { return field(server, 3); }
  int time_since_reimage(int server) const { return field(server, 4); }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ControlCounts {
  int adversary = 0;  // up and adversary-controlled
  int defender = 0;   // up and defender-controlled
  int down = 0;
};

struct StepOutcome {
  Observation obs_adversary;
  Observation obs_defender;
  double reward_adversary = 0.0;
  double reward_defender = 0.0;
  bool done = false;
};

double compromise_probability(int probes, double knowledge_gain);
double sigmoid(double x, const SigmoidParams& theta);
double utility(Player player, int controlled, int down, const EnvConfig& config);

/// The two-player server game. Holds the true state, both players' memory
/// traces, and its own random stream; safe to move between threads.
class MtdEnv {
 public:
  explicit MtdEnv(EnvConfig config);

  /// Restores the initial state and reseeds the environment stream.
  void reset(std::uint64_t seed);

  StepOutcome step(const Action& adversary, const Action& defender);

  Observation observe(Player player) const;

  const EnvConfig& config() const { return config_; }
  const std::vector<ServerState>& servers() const { return servers_; }
  int tau() const { return tau_; }
  bool done() const { return tau_ >= config_.horizon; }
  ControlCounts counts() const;

  /// Pins the uniform draw of compromise checks (tests force branches with it).
  void set_compromise_draw_for_testing(std::optional<double> draw) { forced_draw_ = draw; }

 private:
  struct AdversaryMemory {
    int progress = 0;
    int last_probe = 0;
    std::optional<int> known_reimage;  // learned start of the current downtime
  };
  struct DefenderMemory {
    int observed_probes = 0;
    int last_probe = 0;
    int last_reimage = 0;
  };

  void validate_action(const Action& a) const;
  // Returns whether the probe is charged C_A.
  bool resolve_probe(int server);
  void resolve_reimage(int server);

  EnvConfig config_;
  std::vector<ServerState> servers_;
  std::vector<AdversaryMemory> adversary_memory_;
  std::vector<DefenderMemory> defender_memory_;
  int tau_ = 0;
  Rng rng_;
  std::optional<double> forced_draw_;
};

}  // namespace mtd
