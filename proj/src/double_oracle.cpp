#include "mtd/double_oracle.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mtd/dqn.hpp"

namespace mtd {

BestResponseOracle dqn_oracle(const Config& config) {
  return [config](Player learner, const std::vector<PurePolicy>& opponents,
                  const MixedStrategy& mix, std::uint64_t seed, const std::string& label) {
    return train_best_response(learner, opponents, mix, config, seed, label).policy;
  };
}

InitialPolicies parse_initial_policies(std::string_view name) {
  if (name == "heuristics") return InitialPolicies::kHeuristics;
  if (name == "noop") return InitialPolicies::kNoOp;
  throw std::invalid_argument("initial policies must be 'heuristics' or 'noop', got '" +
                              std::string(name) + "'");
}

std::pair<std::vector<PurePolicy>, std::vector<PurePolicy>> initial_policies(
    const Config& config, InitialPolicies mode) {
  if (mode == InitialPolicies::kNoOp) {
    return {{noop_policy(Player::kAdversary, config)}, {noop_policy(Player::kDefender, config)}};
  }
  return {adversary_heuristics(config), defender_heuristics(config)};
}

namespace {

int index_of(const std::vector<PurePolicy>& set, const std::string& label) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].label() == label) return static_cast<int>(i);
  }
  return -1;
}

std::string describe(const EquilibriumResult& eq) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << "value_a=" << eq.value_a << " value_d=" << eq.value_d;
  return s.str();
}

}  // namespace

DoResult run_double_oracle(const Config& config, std::vector<PurePolicy> adversaries,
                           std::vector<PurePolicy> defenders, const BestResponseOracle& oracle,
                           const DoOptions& options) {
  config.validate();
  if (adversaries.empty() || defenders.empty()) {
    throw std::invalid_argument("double oracle needs nonempty initial policy sets");
  }
  const DoConfig& dc = config.double_oracle;
  const PairEvaluator evaluate = monte_carlo_evaluator(
      config.env, dc.eval_episodes, derive_seed(config.seed, "assess"));
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  DoResult result;
  DoState& st = result.state;
  st.adversaries = std::move(adversaries);
  st.defenders = std::move(defenders);
  st.game = build_game(st.adversaries, st.defenders, evaluate, options.jobs);
  EquilibriumResult eq = solve_msne(st.game);
  st.history.push_back({0, eq.value_a, eq.value_d, std::nullopt, "", 0.0, false, false});
  log("iteration 0: " + describe(eq));
  if (options.on_row) options.on_row(st);

  for (int round = 1; round <= dc.max_iterations; ++round) {
    bool conv[2] = {false, false};  // adversary, defender
    for (Player learner : {Player::kDefender, Player::kAdversary}) {
      const bool def = learner == Player::kDefender;
      const std::string label = std::string(def ? "dqn_d" : "dqn_a") + std::to_string(round);
      const std::vector<PurePolicy>& opponents = def ? st.adversaries : st.defenders;
      const MixedStrategy& mix = def ? eq.sigma_a : eq.sigma_d;
      PurePolicy policy =
          oracle(learner, opponents, mix, derive_seed(config.seed, "oracle:" + label), label);
      if (policy.player() != learner) throw std::logic_error("oracle returned the wrong side");
      ++st.oracle_calls;

      std::vector<PurePolicy>& own = def ? st.defenders : st.adversaries;
      if (index_of(own, policy.label()) < 0) {
        own.push_back(policy);
        extend_game(st.game, st.adversaries, st.defenders, evaluate, options.jobs);
      }
      const int k = index_of(own, policy.label());
      const Eigen::Map<const Eigen::VectorXd> w(mix.weights.data(),
                                                static_cast<Eigen::Index>(mix.weights.size()));
      const double u_br = def ? w.dot(st.game.defender.col(k)) : w.dot(st.game.adversary.row(k));
      const double u_eq = def ? eq.value_d : eq.value_a;
      conv[def ? 1 : 0] = converged(u_br, u_eq, dc.eps_do);

      eq = solve_msne(st.game);
      st.history.push_back({st.oracle_calls, eq.value_a, eq.value_d, learner, policy.label(),
                            u_br, conv[0], conv[1]});
      std::ostringstream msg;
      msg << "iteration " << st.oracle_calls << ": " << player_name(learner) << ' '
          << policy.label() << " payoff " << std::fixed << std::setprecision(3) << u_br
          << " vs equilibrium " << u_eq << (conv[def ? 1 : 0] ? " (no gain)" : "") << "; "
          << describe(eq);
      log(msg.str());
      if (options.on_row) options.on_row(st);
    }
    if (dc.require_both ? (conv[0] && conv[1]) : (conv[0] || conv[1])) {
      st.converged = true;
      break;
    }
  }
  result.equilibrium = std::move(eq);
  return result;
}

void write_do_curve(std::ostream& out, const std::vector<DoHistoryRow>& history) {
  out << "iteration,value_a,value_d,new_policy_player,new_policy_payoff,converged_a,converged_d\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : history) {
    out << r.iteration << ',' << r.value_a << ',' << r.value_d << ',';
    if (r.new_policy_player) {
      out << player_name(*r.new_policy_player) << ',' << r.new_policy_payoff;
    } else {
      out << "none,";
    }
    out << ',' << (r.converged_a ? 1 : 0) << ',' << (r.converged_d ? 1 : 0) << '\n';
  }
}

}  // namespace mtd
