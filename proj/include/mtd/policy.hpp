#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mtd/config.hpp"
#include "mtd/env.hpp"
#include "mtd/qnetwork.hpp"
#include "mtd/rng.hpp"

namespace mtd {

enum class HeuristicKind { kNoOp, kUniform, kMaxProbe, kControlThreshold, kPcp };

const char* heuristic_name(HeuristicKind kind);
HeuristicKind parse_heuristic(std::string_view name);

struct HeuristicPolicy {
  HeuristicKind kind = HeuristicKind::kNoOp;
  HeuristicParams params;
  double knowledge_gain = 0.05;  // used by the Control-Threshold defender
};

struct QNetworkPolicy {
  std::shared_ptr<const QNetwork> network;
  int downtime = 7;  // normalization scale for time_to_up
};

/// A deterministic map from one player's observation to an action. Randomness
/// only enters through tie-breaking, drawn from the caller's stream.
class PurePolicy {
 public:
  static PurePolicy heuristic(Player player, HeuristicKind kind, const HeuristicParams& params,
                              double knowledge_gain);
  static PurePolicy q_network(Player player, std::shared_ptr<const QNetwork> network,
                              int downtime, std::string label);

  Player player() const { return player_; }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  Action act(const Observation& obs, int tau, Rng& rng) const;

  const HeuristicPolicy* as_heuristic() const { return std::get_if<HeuristicPolicy>(&impl_); }
  const QNetworkPolicy* as_q_network() const { return std::get_if<QNetworkPolicy>(&impl_); }

 private:
  PurePolicy(Player player, std::string label, std::variant<HeuristicPolicy, QNetworkPolicy> impl)
      : player_(player), label_(std::move(label)), impl_(std::move(impl)) {}

  Player player_;
  std::string label_;
  std::variant<HeuristicPolicy, QNetworkPolicy> impl_;
};

/// E[n_c^d]: up servers weighted by the chance they were not taken by the
/// last observed probe, all earlier probes assumed to have failed.
double expected_defender_control(const Observation& defender_obs, double knowledge_gain,
                                 bool rho_plus_one = false);

/// Per-server estimate used above; 0 for unprobed or down servers.
double last_probe_compromise_estimate(int observed_probes, double knowledge_gain,
                                      bool rho_plus_one);

/// Adversary heuristics in payoff-table row order: No-Op, MaxProbe, Uniform,
/// Control-Threshold.
std::vector<PurePolicy> adversary_heuristics(const Config& config);
/// Defender heuristics in column order: No-Op, Control-Threshold, PCP,
/// Uniform, MaxProbe.
std::vector<PurePolicy> defender_heuristics(const Config& config);
PurePolicy noop_policy(Player player, const Config& config);

struct MixedStrategy {
  std::vector<double> weights;

  static MixedStrategy pure(std::size_t size, std::size_t index);
  static MixedStrategy uniform(std::size_t size);
  void validate() const;
};

/// Index drawn with probability weights[i].
std::size_t sample(const MixedStrategy& mixed, Rng& rng);

}  // namespace mtd
