#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtd/config.hpp"
#include "mtd/equilibrium.hpp"
#include "mtd/policy.hpp"

namespace mtd {

/// True iff the new best response gains at most eps_do over the equilibrium.
inline bool converged(double u_br, double u_eq, double eps_do) { return u_br <= u_eq + eps_do; }

struct DoHistoryRow {
  int iteration = 0;  // oracle calls so far; 0 is the initial equilibrium
  double value_a = 0.0;
  double value_d = 0.0;
  std::optional<Player> new_policy_player;
  std::string new_policy_label;
  double new_policy_payoff = 0.0;  // vs the opponent mixture it was trained against
  bool converged_a = false;
  bool converged_d = false;
};

struct DoState {
  std::vector<PurePolicy> adversaries;
  std::vector<PurePolicy> defenders;
  EmpiricalGame game;
  std::vector<DoHistoryRow> history;
  int oracle_calls = 0;
  bool converged = false;
};

struct DoResult {
  DoState state;
  EquilibriumResult equilibrium;
};

/// Produces a best response for `learner` against the opponent mixture.
using BestResponseOracle = std::function<PurePolicy(
    Player learner, const std::vector<PurePolicy>& opponents, const MixedStrategy& mix,
    std::uint64_t seed, const std::string& label)>;

/// Deep Q-learning oracle with the training settings of `config`.
BestResponseOracle dqn_oracle(const Config& config);

enum class InitialPolicies { kHeuristics, kNoOp };
InitialPolicies parse_initial_policies(std::string_view name);

struct DoOptions {
  int jobs = 1;
  std::function<void(const std::string&)> log;
  // Called after every history row with the state so far.
  std::function<void(const DoState&)> on_row;
};

/// Alternating best responses (defender first in every round) until both
/// players fail to improve by more than eps_do in the same round, or the
/// round limit is reached.
DoResult run_double_oracle(const Config& config, std::vector<PurePolicy> adversaries,
                           std::vector<PurePolicy> defenders, const BestResponseOracle& oracle,
                           const DoOptions& options = {});

/// Initial sets per the chosen mode.
std::pair<std::vector<PurePolicy>, std::vector<PurePolicy>> initial_policies(
    const Config& config, InitialPolicies mode);

// iteration,value_a,value_d,new_policy_player,new_policy_payoff,converged_a,converged_d
void write_do_curve(std::ostream& out, const std::vector<DoHistoryRow>& history);

}  // namespace mtd
