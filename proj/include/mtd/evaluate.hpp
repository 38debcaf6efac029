#pragma once

#include <cstdint>
#include <functional>

#include "mtd/env.hpp"
#include "mtd/policy.hpp"

namespace mtd {

struct EpisodeReturns {
  double discounted_adversary = 0.0;
  double discounted_defender = 0.0;
  double raw_adversary = 0.0;
  double raw_defender = 0.0;
};

struct StepRecord {
  int tau = 0;  // time step at which the actions were taken
  Action adversary;
  Action defender;
  double reward_adversary = 0.0;
  double reward_defender = 0.0;
  ControlCounts counts;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Plays one full episode; the environment is reset with `env_seed`.
EpisodeReturns run_episode(MtdEnv& env, const PurePolicy& adversary, const PurePolicy& defender,
                           std::uint64_t env_seed, Rng& adversary_rng, Rng& defender_rng,
                           const StepObserver& observer = {});

struct PairEvaluation {
  double adversary = 0.0;  // mean discounted return U^a
  double defender = 0.0;
  double se_adversary = 0.0;  // standard error of the mean
  double se_defender = 0.0;
  int episodes = 0;
};

/// Mean discounted return of both players over `episodes` rollouts. Episode k
/// uses streams derived from (seed, k), so results depend only on the seed.
PairEvaluation evaluate_pair(const PurePolicy& adversary, const PurePolicy& defender,
                             const EnvConfig& config, int episodes, std::uint64_t seed);

}  // namespace mtd
