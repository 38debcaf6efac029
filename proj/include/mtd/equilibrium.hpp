#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtd/evaluate.hpp"
#include "mtd/policy.hpp"

namespace mtd {

/// Bimatrix game over ordered pure-policy sets: rows are adversary
/// policies, columns defender policies.
struct EmpiricalGame {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd adversary;  // A
  Eigen::MatrixXd defender;   // D
  Eigen::MatrixXd se_adversary;
  Eigen::MatrixXd se_defender;

  int rows() const { return static_cast<int>(row_labels.size()); }
  int cols() const { return static_cast<int>(col_labels.size()); }
  void validate() const;
};

/// Game from raw matrices; labels default to r0.., c0...
EmpiricalGame make_game(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d);

using PairEvaluator =
    std::function<PairEvaluation(const PurePolicy& adversary, const PurePolicy& defender)>;

/// Seed of one (row, column) assessment. Keyed by the two labels, so a
/// cell's value does not depend on when or in what order it is filled.
std::uint64_t pair_seed(std::uint64_t seed, const std::string& adversary_label,
                        const std::string& defender_label);

/// Monte-Carlo evaluator over `episodes` rollouts with pair_seed streams.
PairEvaluator monte_carlo_evaluator(const EnvConfig& config, int episodes, std::uint64_t seed);

/// Fills every (row, column) cell. `jobs` > 1 spreads cells over threads;
/// results are identical for any job count.
EmpiricalGame build_game(const std::vector<PurePolicy>& adversaries,
                         const std::vector<PurePolicy>& defenders, const PairEvaluator& evaluate,
                         int jobs = 1);

/// Grows `game` to cover the (larger) policy sets, whose leading entries must
/// match the existing labels. Only new cells are evaluated; returns their count.
int extend_game(EmpiricalGame& game, const std::vector<PurePolicy>& adversaries,
                const std::vector<PurePolicy>& defenders, const PairEvaluator& evaluate,
                int jobs = 1);

/// (sigma_a' A sigma_d, sigma_a' D sigma_d).
std::pair<double, double> mixed_utility(const EmpiricalGame& game, const MixedStrategy& sigma_a,
                                        const MixedStrategy& sigma_d);

/// Best pure-deviation gain of each player.
std::pair<double, double> regret(const EmpiricalGame& game, const MixedStrategy& sigma_a,
                                 const MixedStrategy& sigma_d);

struct EquilibriumResult {
  MixedStrategy sigma_a;
  MixedStrategy sigma_d;
  double value_a = 0.0;
  double value_d = 0.0;
  double regret_a = 0.0;
  double regret_d = 0.0;
  std::string method;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regret tolerance used when none is given: 1e-6 times the payoff scale.
double default_tolerance(const EmpiricalGame& game);

/// Lemke-Howson in exact rational arithmetic with lexicographic ratio tests,
/// trying dropped labels 0, 1, ... in order. Falls back to support
/// enumeration when every path fails the regret check.
EquilibriumResult solve_msne(const EmpiricalGame& game, double tolerance = -1.0);

/// One Lemke-Howson path from the artificial equilibrium; exact arithmetic.
std::pair<std::vector<double>, std::vector<double>> lemke_howson(const Eigen::MatrixXd& a,
                                                                 const Eigen::MatrixXd& d,
                                                                 int dropped_label);

/// First equilibrium found by enumerating equal-size support pairs in
/// increasing size; nullopt-like empty result if none passes `tolerance`.
bool support_enumeration(const EmpiricalGame& game, double tolerance, MixedStrategy& sigma_a,
                         MixedStrategy& sigma_d);

// CSV: adv_policy,def_policy,u_a,u_d,se_a,se_d (one line per cell, row-major).
void write_game_csv(std::ostream& out, const EmpiricalGame& game);
EmpiricalGame read_game_csv(std::istream& in);

// CSV: player,policy_label,probability, then a '# value_a=...' summary line.
void write_equilibrium_csv(std::ostream& out, const EmpiricalGame& game,
                           const EquilibriumResult& eq);

}  // namespace mtd
