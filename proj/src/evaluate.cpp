#include "mtd/evaluate.hpp"

#include <cmath>
#include <string>

namespace mtd {

EpisodeReturns run_episode(MtdEnv& env, const PurePolicy& adversary, const PurePolicy& defender,
                           std::uint64_t env_seed, Rng& adversary_rng, Rng& defender_rng,
                           const StepObserver& observer) {
  if (adversary.player() != Player::kAdversary || defender.player() != Player::kDefender) {
    throw std::invalid_argument("run_episode expects an adversary and a defender policy");
  }
  env.reset(env_seed);
  Observation obs_a = env.observe(Player::kAdversary);
  Observation obs_d = env.observe(Player::kDefender);
  const double gamma = env.config().gamma;
  double discount = 1.0;
  EpisodeReturns out;
  while (!env.done()) {
    const int tau = env.tau();
    const Action a = adversary.act(obs_a, tau, adversary_rng);
    const Action d = defender.act(obs_d, tau, defender_rng);
    StepOutcome step = env.step(a, d);
    out.discounted_adversary += discount * step.reward_adversary;
    out.discounted_defender += discount * step.reward_defender;
    out.raw_adversary += step.reward_adversary;
    out.raw_defender += step.reward_defender;
    discount *= gamma;
    if (observer) {
      observer({tau, a, d, step.reward_adversary, step.reward_defender, env.counts()});
    }
    obs_a = std::move(step.obs_adversary);
    obs_d = std::move(step.obs_defender);
  }
  return out;
}

PairEvaluation evaluate_pair(const PurePolicy& adversary, const PurePolicy& defender,
                             const EnvConfig& config, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_pair needs at least one episode");
  MtdEnv env(config);
  std::vector<double> ra, rd;
  for (int k = 0; k < episodes; ++k) {
    const std::uint64_t episode_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    Rng adversary_rng(derive_seed(episode_seed, "adversary"));
    Rng defender_rng(derive_seed(episode_seed, "defender"));
    const EpisodeReturns r = run_episode(env, adversary, defender,
                                         derive_seed(episode_seed, "env"), adversary_rng,
                                         defender_rng);
    ra.push_back(r.discounted_adversary);
    rd.push_back(r.discounted_defender);
  }
  // Moments about the first sample, so identical returns give exactly zero spread.
  auto moments = [episodes](const std::vector<double>& x, double& mean, double& se) {
    double shift = 0.0;
    for (double v : x) shift += v - x[0];
    shift /= episodes;
    mean = x[0] + shift;
    if (episodes < 2) return;
    double sq = 0.0;
    for (double v : x) sq += (v - x[0] - shift) * (v - x[0] - shift);
    se = std::sqrt(sq / (episodes - 1.0) / episodes);
  };
  PairEvaluation out;
  out.episodes = episodes;
  moments(ra, out.adversary, out.se_adversary);
  moments(rd, out.defender, out.se_defender);
  return out;
}

}  // namespace mtd
