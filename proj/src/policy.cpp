#include "mtd/policy.hpp"

#include <cmath>
#include <numeric>

namespace mtd {
namespace {

// Uniform choice among `candidates`, or no-op when there are none.
Action pick(const std::vector<int>& candidates, Rng& rng) {
  if (candidates.empty()) return Action::noop();
  return Action::at(candidates[uniform_index(rng, static_cast<int>(candidates.size()))]);
}

// Servers of maximal `score` among `eligible`, when that maximum exceeds `floor`.
template <typename Score>
std::vector<int> argmax_set(const std::vector<int>& eligible, Score score, double floor) {
  std::vector<int> best;
  double best_score = floor;
  for (int i : eligible) {
    const double s = score(i);
    if (s > best_score) {
      best_score = s;
      best.assign(1, i);
    } else if (s == best_score && !best.empty()) {
      best.push_back(i);
    }
  }
  return best;
}

std::vector<int> adversary_targets(const Observation& obs) {
  std::vector<int> out;
  for (int i = 0; i < obs.num_servers(); ++i) {
    if (obs.status(i) == 1 && obs.control(i) == 0) out.push_back(i);
  }
  return out;
}

std::vector<int> up_servers(const Observation& obs) {
  std::vector<int> out;
  for (int i = 0; i < obs.num_servers(); ++i) {
    if (obs.status(i) == 1) out.push_back(i);
  }
  return out;
}

Action adversary_act(const HeuristicPolicy& h, const Observation& obs, int tau, Rng& rng) {
  const auto targets = adversary_targets(obs);
  auto max_probe = [&] {
    return pick(argmax_set(targets, [&](int i) { return obs.progress(i); }, -1.0), rng);
  };
  switch (h.kind) {
    case HeuristicKind::kNoOp:
      return Action::noop();
    case HeuristicKind::kUniform:
      if (tau % h.params.adversary_period != 0) return Action::noop();
      return pick(targets, rng);
    case HeuristicKind::kMaxProbe:
      if (tau % h.params.adversary_period != 0) return Action::noop();
      return max_probe();
    case HeuristicKind::kControlThreshold: {
      int controlled = 0;
      for (int i = 0; i < obs.num_servers(); ++i) controlled += obs.control(i);
      if (controlled >= h.params.adversary_threshold * obs.num_servers()) return Action::noop();
      return max_probe();
    }
    case HeuristicKind::kPcp:
      break;
  }
  throw std::invalid_argument("PCP is a defender-only heuristic");
}

Action defender_act(const HeuristicPolicy& h, const Observation& obs, int tau, Rng& rng) {
  const auto up = up_servers(obs);
  switch (h.kind) {
    case HeuristicKind::kNoOp:
      return Action::noop();
    case HeuristicKind::kUniform:
      if (tau % h.params.defender_period != 0) return Action::noop();
      return pick(up, rng);
    case HeuristicKind::kMaxProbe:
      if (tau % h.params.defender_period != 0) return Action::noop();
      return pick(argmax_set(up, [&](int i) { return obs.progress(i); }, 0.0), rng);
    case HeuristicKind::kPcp: {
      std::vector<int> candidates;
      for (int i : up) {
        const int probes = obs.progress(i);
        // Unprobed in the last P completed steps: tau - P .. tau - 1.
        if (probes > 0 && (obs.defender_time_since_probe(i) > h.params.pcp_period ||
                           probes > h.params.pcp_threshold)) {
          candidates.push_back(i);
        }
      }
      return pick(candidates, rng);
    }
    case HeuristicKind::kControlThreshold: {
      int since_reimage = obs.time_since_reimage(0);
      for (int i = 1; i < obs.num_servers(); ++i) {
        since_reimage = std::min(since_reimage, obs.time_since_reimage(i));
      }
      if (since_reimage < h.params.defender_period) return Action::noop();
      const bool plus_one = h.params.ct_rho_plus_one;
      const double expected = expected_defender_control(obs, h.knowledge_gain, plus_one);
      if (expected > h.params.defender_threshold * obs.num_servers()) return Action::noop();
      return pick(argmax_set(up, [&](int i) {
                    return last_probe_compromise_estimate(obs.progress(i), h.knowledge_gain,
                                                          plus_one);
                  }, 0.0),
                  rng);
    }
  }
  throw std::invalid_argument("unknown defender heuristic");
}

}  // namespace

const char* heuristic_name(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::kNoOp: return "NoOp";
    case HeuristicKind::kUniform: return "Uniform";
    case HeuristicKind::kMaxProbe: return "MaxProbe";
    case HeuristicKind::kControlThreshold: return "ControlThreshold";
    case HeuristicKind::kPcp: return "PCP";
  }
  return "?";
}

HeuristicKind parse_heuristic(std::string_view name) {
  for (auto kind : {HeuristicKind::kNoOp, HeuristicKind::kUniform, HeuristicKind::kMaxProbe,
                    HeuristicKind::kControlThreshold, HeuristicKind::kPcp}) {
    if (name == heuristic_name(kind)) return kind;
  }
  throw std::invalid_argument("unknown heuristic '" + std::string(name) + "'");
}

PurePolicy PurePolicy::heuristic(Player player, HeuristicKind kind, const HeuristicParams& params,
                                 double knowledge_gain) {
  if (player == Player::kAdversary && kind == HeuristicKind::kPcp) {
    throw std::invalid_argument("PCP is a defender-only heuristic");
  }
  params.validate();
  return PurePolicy(player, heuristic_name(kind), HeuristicPolicy{kind, params, knowledge_gain});
}

PurePolicy PurePolicy::q_network(Player player, std::shared_ptr<const QNetwork> network,
                                 int downtime, std::string label) {
  if (!network) throw std::invalid_argument("q_network policy needs a network");
  return PurePolicy(player, std::move(label), QNetworkPolicy{std::move(network), downtime});
}

Action PurePolicy::act(const Observation& obs, int tau, Rng& rng) const {
  if (obs.player != player_) throw std::invalid_argument("observation belongs to the other player");
  if (const auto* h = as_heuristic()) {
    return player_ == Player::kAdversary ? adversary_act(*h, obs, tau, rng)
                                         : defender_act(*h, obs, tau, rng);
  }
  const auto& q = std::get<QNetworkPolicy>(impl_);
  return action_from_index(q.network->greedy_action(normalize_observation(obs, q.downtime)));
}

double last_probe_compromise_estimate(int observed_probes, double knowledge_gain,
                                      bool rho_plus_one) {
  if (observed_probes <= 0) return 0.0;
  const int exponent = rho_plus_one ? observed_probes + 1 : observed_probes;
  return -std::expm1(-knowledge_gain * exponent);
}

double expected_defender_control(const Observation& obs, double knowledge_gain,
                                 bool rho_plus_one) {
  double expected = 0.0;
  for (int i = 0; i < obs.num_servers(); ++i) {
    if (obs.status(i) == 0) continue;
    expected += 1.0 - last_probe_compromise_estimate(obs.progress(i), knowledge_gain, rho_plus_one);
  }
  return expected;
}

std::vector<PurePolicy> adversary_heuristics(const Config& config) {
  std::vector<PurePolicy> out;
  for (auto kind : {HeuristicKind::kNoOp, HeuristicKind::kMaxProbe, HeuristicKind::kUniform,
                    HeuristicKind::kControlThreshold}) {
    out.push_back(PurePolicy::heuristic(Player::kAdversary, kind, config.heuristics,
                                        config.env.knowledge_gain));
  }
  return out;
}

std::vector<PurePolicy> defender_heuristics(const Config& config) {
  std::vector<PurePolicy> out;
  for (auto kind : {HeuristicKind::kNoOp, HeuristicKind::kControlThreshold, HeuristicKind::kPcp,
                    HeuristicKind::kUniform, HeuristicKind::kMaxProbe}) {
    out.push_back(PurePolicy::heuristic(Player::kDefender, kind, config.heuristics,
                                        config.env.knowledge_gain));
  }
  return out;
}

PurePolicy noop_policy(Player player, const Config& config) {
  return PurePolicy::heuristic(player, HeuristicKind::kNoOp, config.heuristics,
                               config.env.knowledge_gain);
}

MixedStrategy MixedStrategy::pure(std::size_t size, std::size_t index) {
  MixedStrategy m{std::vector<double>(size, 0.0)};
  m.weights.at(index) = 1.0;
  return m;
}

MixedStrategy MixedStrategy::uniform(std::size_t size) {
  return MixedStrategy{std::vector<double>(size, 1.0 / static_cast<double>(size))};
}

void MixedStrategy::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixed strategy over an empty set");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("mixed strategy weights must be finite and nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("mixed strategy weights sum to " + std::to_string(total) +
                                ", expected 1");
  }
}

std::size_t sample(const MixedStrategy& mixed, Rng& rng) {
  mixed.validate();
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < mixed.weights.size(); ++i) {
    if (mixed.weights[i] <= 0.0) continue;
    last_positive = i;
    acc += mixed.weights[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace mtd
