// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// hard criterion fails. Soft checks are reported but never fail the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mtd/double_oracle.hpp"
#include "mtd/dqn.hpp"
#include "mtd/equilibrium.hpp"
#include "mtd/evaluate.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kClosedFormTol = 1e-3;
constexpr double kClosedFormSeconds = 1.0;
constexpr int kGridEpisodes = 2000;
constexpr std::uint64_t kGridSeed = 11;
constexpr double kGridTol = 5.0;
constexpr double kGridSeconds = 600.0;
constexpr int kRandomGames = 500;
constexpr double kRegretTol = 1e-6;
constexpr double kNashSeconds = 60.0;
constexpr int kGradientPoints = 100;
constexpr double kGradientRelTol = 1e-4;
constexpr double kGradientSeconds = 10.0;
constexpr long kFuzzSteps = 100000;
constexpr double kFuzzSeconds = 30.0;
constexpr int kBrEpisodes = 50;
constexpr int kBrEvalEpisodes = 50;
constexpr double kAdversaryBrMin = 74.0;
constexpr double kDefenderBrMin = 97.0;
constexpr double kBrSeconds = 1800.0;
constexpr int kDoTrainEpisodes = 50;
constexpr int kDoEvalEpisodes = 50;
constexpr int kDoMaxCalls = 10;
constexpr double kDoEps = 1.0;
constexpr double kInitRobustnessTol = 5.0;
constexpr double kNeighborhoodA[2] = {46.0, 51.0};
constexpr double kNeighborhoodD[2] = {87.0, 90.0};

constexpr double kNoOpA = 26.8929;
constexpr double kNoOpD = 98.1972;

// Reference heuristic grid, rows NoOp, MaxProbe, Uniform, ControlThreshold;
// columns NoOp, ControlThreshold, PCP, Uniform, MaxProbe.
constexpr double kRefA[4][5] = {{26.89, 26.89, 26.89, 46.03, 26.89},
                                {78.66, 75.67, 36.58, 64.56, 41.99},
                                {79.08, 70.97, 44.43, 56.83, 57.14},
                                {63.64, 65.58, 46.38, 59.54, 60.43}};
constexpr double kRefD[4][5] = {{98.20, 98.20, 98.20, 95.83, 98.20},
                                {47.69, 49.62, 93.01, 67.12, 86.82},
                                {46.74, 51.58, 89.48, 76.23, 75.21},
                                {85.98, 85.35, 88.81, 81.32, 80.09}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Line {
  std::string id;
  std::string name;
  bool hard = true;
  Outcome outcome;
  double seconds = 0.0;
};

std::vector<Line> g_lines;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const Line& l) {
  const char* tag = l.outcome.pass ? "PASS" : (l.hard ? "FAIL" : "SOFT-MISS");
  std::printf("[%s] %-4s %s (%.1fs): %s\n", tag, l.id.c_str(), l.name.c_str(), l.seconds,
              l.outcome.detail.c_str());
  std::fflush(stdout);
}

void criterion(const std::string& id, const std::string& name, bool hard,
               const std::function<Outcome()>& body) {
  Line l{id, name, hard, {}, 0.0};
  const auto start = std::chrono::steady_clock::now();
  try {
    l.outcome = body();
  } catch (const std::exception& e) {
    l.outcome = {false, std::string("exception: ") + e.what()};
  }
  l.seconds = seconds_since(start);
  report(l);
  g_lines.push_back(l);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

bool is_control_threshold(const std::string& label) { return label == "ControlThreshold"; }

Outcome closed_form() {
  const Config c;
  const auto start = std::chrono::steady_clock::now();
  const EmpiricalGame g =
      build_game({noop_policy(Player::kAdversary, c)}, {noop_policy(Player::kDefender, c)},
                 monte_carlo_evaluator(c.env, 50, c.seed), 1);
  const double secs = seconds_since(start);
  const double ea = std::abs(g.adversary(0, 0) - kNoOpA);
  const double ed = std::abs(g.defender(0, 0) - kNoOpD);
  return {ea <= kClosedFormTol && ed <= kClosedFormTol && secs < kClosedFormSeconds,
          fmt("cell (%.4f, %.4f), errors (%.1e, %.1e)", g.adversary(0, 0), g.defender(0, 0), ea,
              ed) +
              fmt(", %.3fs", secs)};
}

EmpiricalGame g_grid;

Outcome grid_hard() {
  const Config c;
  const auto start = std::chrono::steady_clock::now();
  g_grid = build_game(adversary_heuristics(c), defender_heuristics(c),
                      monte_carlo_evaluator(c.env, kGridEpisodes, kGridSeed), 1);
  const double secs = seconds_since(start);
  int bad = 0;
  double worst = 0.0;
  std::string worst_cell;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (is_control_threshold(g_grid.row_labels[i]) || is_control_threshold(g_grid.col_labels[j])) {
        continue;
      }
      // Cells whose reference is the no-attack closed form are pinned to it.
      const bool deterministic = kRefA[i][j] == 26.89 && kRefD[i][j] == 98.20;
      const double tol = deterministic ? kClosedFormTol : kGridTol;
      const double refa = deterministic ? kNoOpA : kRefA[i][j];
      const double refd = deterministic ? kNoOpD : kRefD[i][j];
      const double e = std::max(std::abs(g_grid.adversary(i, j) - refa),
                                std::abs(g_grid.defender(i, j) - refd));
      if (e > tol) ++bad;
      if (!deterministic && e > worst) {
        worst = e;
        worst_cell = g_grid.row_labels[i] + "/" + g_grid.col_labels[j];
      }
    }
  }
  return {bad == 0 && secs < kGridSeconds,
          std::to_string(bad) + " hard cells out of tolerance; largest stochastic deviation " +
              fmt("%.2f", worst) + " at " + worst_cell + fmt(", %.1fs", secs)};
}

Outcome grid_soft() {
  double worst = 0.0;
  std::string cell;
  int bad = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (!is_control_threshold(g_grid.row_labels[i]) && !is_control_threshold(g_grid.col_labels[j])) {
        continue;
      }
      const double e = std::max(std::abs(g_grid.adversary(i, j) - kRefA[i][j]),
                                std::abs(g_grid.defender(i, j) - kRefD[i][j]));
      if (e > kGridTol) ++bad;
      if (e > worst) {
        worst = e;
        cell = g_grid.row_labels[i] + "/" + g_grid.col_labels[j];
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " Control-Threshold cells beyond 5.0; largest " +
                        fmt("%.2f", worst) + " at " + cell};
}

Outcome nash_suite() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2024, "acceptance-nash"));
  double worst = 0.0;
  int bad = 0;
  for (int k = 0; k < kRandomGames; ++k) {
    const int m = 2 + uniform_index(rng, 5), n = 2 + uniform_index(rng, 5);
    Eigen::MatrixXd a(m, n), d(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        a(i, j) = uniform01(rng);
        d(i, j) = uniform01(rng);
      }
    }
    const EmpiricalGame g = make_game(a, d);
    const EquilibriumResult eq = solve_msne(g);
    const auto [ra, rd] = regret(g, eq.sigma_a, eq.sigma_d);
    worst = std::max({worst, ra, rd});
    if (ra > kRegretTol || rd > kRegretTol) ++bad;
  }

  Eigen::MatrixXd mp(2, 2);
  mp << 1, -1, -1, 1;
  const EquilibriumResult pennies = solve_msne(make_game(mp, -mp));
  const bool pennies_ok = pennies.sigma_a.weights == std::vector<double>{0.5, 0.5} &&
                          pennies.sigma_d.weights == std::vector<double>{0.5, 0.5};
  Eigen::MatrixXd pa(2, 2), pd(2, 2);
  pa << 3, 0, 5, 1;  // row 1 defects
  pd << 3, 5, 0, 1;  // column 1 defects
  const EquilibriumResult pd_eq = solve_msne(make_game(pa, pd));
  const bool pd_ok = pd_eq.sigma_a.weights == std::vector<double>{0, 1} &&
                     pd_eq.sigma_d.weights == std::vector<double>{0, 1} &&
                     pd_eq.regret_a == 0.0 && pd_eq.regret_d == 0.0;
  const double secs = seconds_since(start);
  return {bad == 0 && pennies_ok && pd_ok && secs < kNashSeconds,
          std::to_string(bad) + " of " + std::to_string(kRandomGames) +
              " games above tolerance, worst regret " + fmt("%.2e", worst) +
              "; matching pennies " + (pennies_ok ? "exact" : "WRONG") + ", prisoner's dilemma " +
              (pd_ok ? "exact" : "WRONG")};
}

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(2024, "acceptance-gradient"));
  QNetwork net = QNetwork::for_servers(2, 32);
  const int batch = 8;
  double worst = 0.0;
  int bad = 0;
  long compared = 0;
  for (int point = 0; point < kGradientPoints; ++point) {
    net.initialize(rng);
    for (std::size_t p = 0; p < net.parameter_count(); ++p) {
      net.set_parameter(p, net.parameter(p) + 0.2 * (uniform01(rng) - 0.5));
    }
    Eigen::MatrixXd inputs(10, batch);
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = uniform01(rng);
    std::vector<int> actions(batch);
    std::vector<double> targets(batch);
    for (int i = 0; i < batch; ++i) {
      actions[i] = uniform_index(rng, 3);
      targets[i] = 4.0 * uniform01(rng) - 2.0;
    }
    ParameterSet grad;
    net.loss_and_gradient(inputs, actions, targets, &grad);
    // Step balancing truncation (h^2) against rounding (eps/h) error.
    const double h = 1e-5;
    for (std::size_t p = 0; p < net.parameter_count(); ++p) {
      const double saved = net.parameter(p);
      net.set_parameter(p, saved + h);
      const double up = net.loss_and_gradient(inputs, actions, targets, nullptr);
      net.set_parameter(p, saved - h);
      const double down = net.loss_and_gradient(inputs, actions, targets, nullptr);
      net.set_parameter(p, saved);
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = flat_value(grad, p);
      // Entries this small are dominated by finite-difference rounding.
      if (std::max(std::abs(numeric), std::abs(analytic)) < 1e-7) continue;
      const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
      worst = std::max(worst, rel);
      if (rel >= kGradientRelTol) ++bad;
      ++compared;
    }
  }
  const double secs = seconds_since(start);
  return {bad == 0 && secs < kGradientSeconds, std::to_string(compared) + " partials at " + std::to_string(kGradientPoints) +
                        " points, worst relative error " + fmt("%.2e", worst)};
}

Outcome env_fuzz() {
  const auto start = std::chrono::steady_clock::now();
  EnvConfig c;
  MtdEnv env(c);
  Rng rng(derive_seed(2024, "acceptance-fuzz"));
  long conservation = 0, bounds = 0, downtime = 0, steps = 0;
  std::vector<int> reimaged_at(c.num_servers, -1);
  std::vector<int> down_rewards(c.num_servers, 0);
  int episode = 0;
  env.reset(derive_seed(2024, static_cast<std::uint64_t>(episode)));
  while (steps < kFuzzSteps) {
    if (env.done()) {
      env.reset(derive_seed(2024, static_cast<std::uint64_t>(++episode)));
      std::fill(reimaged_at.begin(), reimaged_at.end(), -1);
    }
    const Action a = action_from_index(uniform_index(rng, c.num_servers + 1));
    const Action d = action_from_index(uniform_index(rng, c.num_servers + 1));
    if (d.target && env.servers()[*d.target].up()) {
      reimaged_at[*d.target] = env.tau();
      down_rewards[*d.target] = 0;
    }
    const StepOutcome o = env.step(a, d);
    ++steps;
    const ControlCounts k = env.counts();
    if (k.adversary + k.defender + k.down != c.num_servers) ++conservation;
    if (!(o.reward_defender > 0.0 && o.reward_defender < 1.0) ||
        !(o.reward_adversary > -c.probe_cost && o.reward_adversary < 1.0)) {
      ++bounds;
    }
    for (int i = 0; i < c.num_servers; ++i) {
      if (reimaged_at[i] < 0) continue;
      const ServerState& s = env.servers()[i];
      if (!s.up()) {
        ++down_rewards[i];
      } else {
        // Back up: must have been down for exactly delta rewards, reset and defender-held.
        if (down_rewards[i] != c.downtime || s.probes != 0 || s.controller != Player::kDefender) {
          ++downtime;
        }
        reimaged_at[i] = -1;
      }
      if (!s.up() && env.tau() - reimaged_at[i] > c.downtime) ++downtime;
    }
  }
  const double secs = seconds_since(start);
  const long total = conservation + bounds + downtime;
  return {total == 0 && secs < kFuzzSeconds,
          std::to_string(steps) + " steps: " + std::to_string(conservation) + " conservation, " +
              std::to_string(bounds) + " reward-bound, " + std::to_string(downtime) +
              " downtime violations" + fmt(", %.1fs", secs)};
}

double br_payoff(Player learner) {
  Config c;
  c.train.episodes = kBrEpisodes;
  const Player other = learner == Player::kAdversary ? Player::kDefender : Player::kAdversary;
  const std::vector<PurePolicy> opp{noop_policy(other, c)};
  const std::string label = learner == Player::kAdversary ? "br_adversary" : "br_defender";
  const BestResponse br = train_best_response(learner, opp, MixedStrategy::pure(1, 0), c,
                                              derive_seed(c.seed, "oracle:" + label), label);
  const bool adv = learner == Player::kAdversary;
  const PairEvaluation e =
      adv ? evaluate_pair(br.policy, opp[0], c.env, kBrEvalEpisodes,
                          pair_seed(c.seed, label, opp[0].label()))
          : evaluate_pair(opp[0], br.policy, c.env, kBrEvalEpisodes,
                          pair_seed(c.seed, opp[0].label(), label));
  return adv ? e.adversary : e.defender;
}

Outcome br_adversary() {
  const auto start = std::chrono::steady_clock::now();
  const double u = br_payoff(Player::kAdversary);
  const double secs = seconds_since(start);
  return {u >= kAdversaryBrMin && secs <= kBrSeconds,
          fmt("greedy return %.2f vs No-Op defender (need >= %.1f)", u, kAdversaryBrMin)};
}

Outcome br_defender() {
  const auto start = std::chrono::steady_clock::now();
  const double u = br_payoff(Player::kDefender);
  const double secs = seconds_since(start);
  return {u >= kDefenderBrMin && secs <= kBrSeconds,
          fmt("greedy return %.2f vs No-Op adversary (need >= %.1f)", u, kDefenderBrMin)};
}

Config do_config() {
  Config c;
  c.train.episodes = kDoTrainEpisodes;
  c.double_oracle.eval_episodes = kDoEvalEpisodes;
  c.double_oracle.eps_do = kDoEps;
  c.double_oracle.max_iterations = kDoMaxCalls / 2;
  return c;
}

DoResult g_do_heuristics, g_do_noop;

DoResult run_do(InitialPolicies mode) {
  const Config c = do_config();
  auto [advs, defs] = initial_policies(c, mode);
  DoOptions opt;
  opt.log = [](const std::string& m) { std::cerr << "  " << m << '\n'; };
  return run_double_oracle(c, std::move(advs), std::move(defs), dqn_oracle(c), opt);
}

double max_se(const EmpiricalGame& g) {
  return std::max(g.se_adversary.maxCoeff(), g.se_defender.maxCoeff());
}

// Checks both the learner-gain invariant and the criterion's statement that the
// adversary's value does not rise after a defender iteration, within noise.
std::string invariant_violations(const DoResult& r, int& count) {
  const auto& h = r.state.history;
  const double slack = kDoEps + 2.0 * max_se(r.state.game);
  std::ostringstream s;
  count = 0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    const bool def = *h[k].new_policy_player == Player::kDefender;
    const double gain = def ? h[k].value_d - h[k - 1].value_d : h[k].value_a - h[k - 1].value_a;
    if (gain < -slack) {
      ++count;
      s << " call " << k << " learner value fell " << -gain << ';';
    }
    if (def && h[k].value_a - h[k - 1].value_a > slack) {
      ++count;
      s << " call " << k << " adversary value rose " << h[k].value_a - h[k - 1].value_a << ';';
    }
  }
  return s.str();
}

Outcome do_behavior() {
  g_do_heuristics = run_do(InitialPolicies::kHeuristics);
  const DoState& st = g_do_heuristics.state;
  int violations = 0;
  const std::string where = invariant_violations(g_do_heuristics, violations);
  const bool ok = st.converged && st.oracle_calls <= kDoMaxCalls && violations == 0;
  return {ok, std::string(st.converged ? "converged" : "not converged") + " after " +
                  std::to_string(st.oracle_calls) + " oracle calls; final " +
                  fmt("(%.2f, %.2f)", g_do_heuristics.equilibrium.value_a,
                      g_do_heuristics.equilibrium.value_d) +
                  "; " + std::to_string(violations) + " noise-tolerant invariant violations" +
                  where};
}

Outcome do_init_robustness() {
  g_do_noop = run_do(InitialPolicies::kNoOp);
  const double da = std::abs(g_do_noop.equilibrium.value_a - g_do_heuristics.equilibrium.value_a);
  const double dd = std::abs(g_do_noop.equilibrium.value_d - g_do_heuristics.equilibrium.value_d);
  return {da <= kInitRobustnessTol && dd <= kInitRobustnessTol &&
              g_do_noop.state.oracle_calls <= kDoMaxCalls && g_do_noop.state.converged,
          fmt("noop-init final (%.2f, %.2f), differences (%.2f, %.2f)",
              g_do_noop.equilibrium.value_a, g_do_noop.equilibrium.value_d, da, dd) +
              " after " + std::to_string(g_do_noop.state.oracle_calls) + " oracle calls"};
}

Outcome do_neighborhood() {
  const double a = g_do_heuristics.equilibrium.value_a, d = g_do_heuristics.equilibrium.value_d;
  return {a >= kNeighborhoodA[0] && a <= kNeighborhoodA[1] && d >= kNeighborhoodD[0] &&
              d <= kNeighborhoodD[1],
          fmt("final (%.2f, %.2f) vs adversary %.0f-%.0f", a, d, kNeighborhoodA[0],
              kNeighborhoodA[1]) +
              fmt(", defender %.0f-%.0f", kNeighborhoodD[0], kNeighborhoodD[1])};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "mtd_acceptance_determinism";
  fs::remove_all(base);
  std::ostringstream sink;
  struct Run {
    std::vector<std::string> args;
    std::vector<std::string> csvs;
  };
  const std::vector<Run> runs = {
      {{"payoff-table", "--episodes", "20", "--seed", "5", "--jobs", "1"}, {"payoff_table.csv"}},
      {{"simulate", "--adversary", "Uniform", "--defender", "PCP", "--episodes", "3", "--trace",
        "--seed", "5"},
       {"simulate.csv", "trace.csv"}},
      {{"solve", "--init", "noop", "--ne", "3", "--t", "200", "--episodes", "5", "--set",
        "max_iterations=2", "--jobs", "1"},
       {"game.csv", "do_curve.csv", "equilibrium.csv"}},
  };
  int compared = 0, differing = 0;
  std::string detail;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const fs::path first = base / ("run" + std::to_string(r));
    const fs::path second = base / ("replay" + std::to_string(r));
    std::vector<std::string> args = runs[r].args;
    args.push_back("--out");
    args.push_back(first.string());
    const int code = cli::run(args, sink, sink);
    if (code != cli::kExitOk && code != cli::kExitNotConverged) {
      return {false, runs[r].args[0] + " exited with " + std::to_string(code)};
    }
    cli::run({"replay", (first / "manifest.txt").string(), "--out", second.string()}, sink, sink);
    for (const auto& csv : runs[r].csvs) {
      ++compared;
      const std::string a = slurp(first / csv), b = slurp(second / csv);
      if (a.empty() || a != b) {
        ++differing;
        detail += " " + runs[r].args[0] + "/" + csv;
      }
    }
  }
  fs::remove_all(base);
  return {differing == 0, std::to_string(compared) + " CSVs compared after replay, " +
                              std::to_string(differing) + " differ" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") quick = true;
  }
  criterion("1", "closed-form NoOp/NoOp payoff", true, closed_form);
  criterion("2", "heuristic grid, hard cells", true, grid_hard);
  criterion("2s", "heuristic grid, Control-Threshold cells", false, grid_soft);
  criterion("3", "Nash solver property suite", true, nash_suite);
  criterion("4", "gradient vs central differences", true, gradient_check);
  criterion("5", "environment invariant fuzz", true, env_fuzz);
  if (!quick) {
    criterion("6a", "adversary DQN best response vs No-Op", true, br_adversary);
    criterion("6b", "defender DQN best response vs No-Op", true, br_defender);
    criterion("7", "double oracle terminates with noise-tolerant gains", true, do_behavior);
    criterion("7b", "noop-initialized run within 5 of heuristic-initialized", true,
              do_init_robustness);
    criterion("7s", "final values near the reference neighborhood", false, do_neighborhood);
  }
  criterion("8", "byte-identical CSVs on manifest replay", true, determinism);

  int failed = 0;
  for (const auto& l : g_lines) failed += l.hard && !l.outcome.pass;
  std::printf("%d of %zu hard criteria failed\n", failed,
              static_cast<std::size_t>(std::count_if(g_lines.begin(), g_lines.end(),
                                                     [](const Line& l) { return l.hard; })));
  return failed == 0 ? 0 : 1;
}
