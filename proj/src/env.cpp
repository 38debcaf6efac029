#include "mtd/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mtd {

Player parse_player(std::string_view name) {
  if (name == "adversary" || name == "a" || name == "adv") return Player::kAdversary;
  if (name == "defender" || name == "d" || name == "def") return Player::kDefender;
  throw std::invalid_argument("unknown player '" + std::string(name) + "'");
}

double compromise_probability(int probes, double knowledge_gain) {
  return -std::expm1(-knowledge_gain * (probes + 1));
}

double sigmoid(double x, const SigmoidParams& theta) {
  const double z = std::clamp(-theta.slope * (x - theta.threshold), -700.0, 700.0);
  return 1.0 / (1.0 + std::exp(z));
}

double utility(Player player, int controlled, int down, const EnvConfig& config) {
  const bool adv = player == Player::kAdversary;
  const double w = adv ? config.w_adversary : config.w_defender;
  const SigmoidParams& theta = adv ? config.theta_adversary : config.theta_defender;
  const double m = config.num_servers;
  return w * sigmoid(controlled / m, theta) + (1.0 - w) * sigmoid((controlled + down) / m, theta);
}

MtdEnv::MtdEnv(EnvConfig config) : config_(config) {
  config_.validate();
  reset(0);
}

void MtdEnv::reset(std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(config_.num_servers);
  servers_.assign(m, ServerState{});
  adversary_memory_.assign(m, AdversaryMemory{});
  defender_memory_.assign(m, DefenderMemory{});
  tau_ = 0;
  rng_.seed(seed);
}

void MtdEnv::validate_action(const Action& a) const {
  if (a.target && (*a.target < 0 || *a.target >= config_.num_servers)) {
    throw std::out_of_range("action targets server " + std::to_string(*a.target) +
                            " but M = " + std::to_string(config_.num_servers));
  }
}

ControlCounts MtdEnv::counts() const {
  ControlCounts c;
  for (const auto& s : servers_) {
    if (!s.up()) {
      ++c.down;
    } else if (s.controller == Player::kAdversary) {
      ++c.adversary;
    } else {
      ++c.defender;
    }
  }
  return c;
}

bool MtdEnv::resolve_probe(int i) {
  ServerState& server = servers_[i];
  AdversaryMemory& mem = adversary_memory_[i];
  mem.last_probe = tau_;
  if (!server.up()) {
    // Reveals the downtime and clears the stale progress estimate.
    mem.known_reimage = server.reimaged_at;
    mem.progress = 0;
    return config_.charge_probe_on_down;
  }
  const double draw = forced_draw_ ? *forced_draw_ : uniform01(rng_);
  const int counted = server.probes + (config_.count_current_probe ? 1 : 0);
  if (draw < compromise_probability(counted, config_.knowledge_gain)) {
    server.controller = Player::kAdversary;
  }
  ++server.probes;
  ++mem.progress;
  bool seen = config_.miss_probability == 0.0;
  if (config_.miss_probability > 0.0 && config_.miss_probability < 1.0) {
    seen = uniform01(rng_) >= config_.miss_probability;
  }
  if (seen) {
    ++defender_memory_[i].observed_probes;
    defender_memory_[i].last_probe = tau_;
  }
  return true;
}

void MtdEnv::resolve_reimage(int j) {
  ServerState& server = servers_[j];
  if (!server.up()) return;
  if (server.controller == Player::kAdversary) {
    adversary_memory_[j].known_reimage = tau_;
    adversary_memory_[j].progress = 0;
  }
  server.controller = Player::kDefender;
  server.probes = 0;
  server.reimaged_at = tau_;
  defender_memory_[j].observed_probes = 0;
  defender_memory_[j].last_reimage = tau_;
}

StepOutcome MtdEnv::step(const Action& adversary, const Action& defender) {
  if (done()) throw std::logic_error("step() called on a finished episode");
  validate_action(adversary);
  validate_action(defender);

  // Probe resolves first, then reimage, then downtime expiry.
  const bool charged = adversary.target && resolve_probe(*adversary.target);
  if (defender.target) resolve_reimage(*defender.target);

  // Down for states tau0+1 .. tau0+downtime, i.e. exactly `downtime` rewards.
  for (auto& server : servers_) {
    if (server.reimaged_at && (tau_ + 1) - *server.reimaged_at > config_.downtime) {
      server.reimaged_at.reset();
      server.probes = 0;
      server.controller = Player::kDefender;
    }
  }
  ++tau_;

  const ControlCounts c = counts();
  StepOutcome out;
  out.reward_adversary = utility(Player::kAdversary, c.adversary, c.down, config_) -
                         (charged ? config_.probe_cost : 0.0);
  out.reward_defender = utility(Player::kDefender, c.defender, c.down, config_);
  out.obs_adversary = observe(Player::kAdversary);
  out.obs_defender = observe(Player::kDefender);
  out.done = done();
  return out;
}

Observation MtdEnv::observe(Player player) const {
  Observation obs;
  obs.player = player;
  obs.values.reserve(servers_.size() * kObsFields);
  for (std::size_t i = 0; i < servers_.size(); ++i) {
    const ServerState& server = servers_[i];
    if (player == Player::kAdversary) {
      const AdversaryMemory& mem = adversary_memory_[i];
      int status = 1;
      int time_to_up = 0;
      if (mem.known_reimage && tau_ - *mem.known_reimage <= config_.downtime) {
        status = 0;
        time_to_up = config_.downtime - (tau_ - *mem.known_reimage);
      }
      const int control = server.up() && server.controller == Player::kAdversary ? 1 : 0;
      obs.values.insert(obs.values.end(),
                        {status, time_to_up, mem.progress, control, tau_ - mem.last_probe});
    } else {
      const DefenderMemory& mem = defender_memory_[i];
      const int status = server.up() ? 1 : 0;
      const int time_to_up = server.up() ? 0 : config_.downtime - (tau_ - *server.reimaged_at);
      obs.values.insert(obs.values.end(), {status, time_to_up, mem.observed_probes,
                                           tau_ - mem.last_probe, tau_ - mem.last_reimage});
    }
  }
  return obs;
}

}  // namespace mtd
