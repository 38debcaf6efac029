#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mtd/config.hpp"
#include "mtd/double_oracle.hpp"
#include "mtd/dqn.hpp"
#include "mtd/equilibrium.hpp"
#include "mtd/evaluate.hpp"
#include "mtd/serialize.hpp"

namespace fs = std::filesystem;

namespace mtd::cli {

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> ne;
  std::optional<int> horizon;
  std::vector<std::string> sets;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* app, Common& c, bool model = true) {
  app->add_option("--out", c.out, "Output directory (created if missing)");
  app->add_option("--jobs", c.jobs, "Worker threads for pair evaluation")
      ->check(CLI::PositiveNumber);
  if (!model) return;
  app->add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("--set", c.sets, "Extra key=value config assignment (repeatable)");
  app->add_option("--ne", c.ne, "Training episodes per oracle call");
  app->add_option("--t", c.horizon, "Episode length T");
}

Config resolve_config(const Common& c) {
  Config config = c.config_path.empty() ? Config{} : load_config(c.config_path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_key(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) config.seed = *c.seed;
  if (c.ne) config.train.episodes = *c.ne;
  if (c.horizon) config.env.horizon = *c.horizon;
  config.validate();
  return config;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Written when a run starts and rewritten with the outcome when it ends.
class Manifest {
 public:
  Manifest(fs::path dir, std::string subcommand, std::vector<std::string> args,
           std::optional<Config> config)
      : dir_(std::move(dir)),
        subcommand_(std::move(subcommand)),
        args_(std::move(args)),
        config_(std::move(config)),
        started_(utc_now()) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    if (config_) {
      std::ofstream(dir_ / "config.txt") << format_config(*config_);
      artifacts_.push_back("config.txt");
    }
    write("running");
  }

  void artifact(const std::string& name) { artifacts_.push_back(name); }
  void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }
  void finish(const std::string& status) { write(status); }
  const fs::path& dir() const { return dir_; }

 private:
  void write(const std::string& status) {
    if (dir_.empty()) return;
    std::ofstream m(dir_ / "manifest.txt");
    m << "subcommand=" << subcommand_ << '\n';
    m << "version=" << kVersion << '\n';
    if (config_) m << "seed=" << config_->seed << '\n';
    m << "started=" << started_ << '\n';
    if (status != "running") m << "finished=" << utc_now() << '\n';
    m << "status=" << status << '\n';
    for (const auto& [k, v] : notes_) m << k << '=' << v << '\n';
    for (const auto& a : artifacts_) m << "artifact=" << a << '\n';
    for (const auto& a : args_) m << "arg=" << a << '\n';
    if (config_) {
      for (const auto& [k, v] : config_entries(*config_)) m << "config." << k << '=' << v << '\n';
    }
  }

  fs::path dir_;
  std::string subcommand_;
  std::vector<std::string> args_;
  std::optional<Config> config_;
  std::string started_;
  std::vector<std::string> artifacts_;
  std::vector<std::pair<std::string, std::string>> notes_;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

PurePolicy resolve_policy(const std::string& spec, Player player, const Config& config) {
  if (fs::exists(spec) && fs::is_regular_file(spec)) {
    PurePolicy p = load_policy_file(spec, config);
    if (p.player() != player) throw std::invalid_argument(spec + " is not a " + player_name(player) + " policy");
    return p;
  }
  std::string name = spec;
  if (name.rfind("heuristic:", 0) == 0) name = name.substr(10);
  return PurePolicy::heuristic(player, parse_heuristic(name), config.heuristics,
                               config.env.knowledge_gain);
}

// Writes to <out>/<name> when an output directory is set, else to stdout.
template <typename Fn>
void emit(Manifest& manifest, const std::string& name, std::ostream& stdout_stream, Fn write) {
  if (manifest.dir().empty()) {
    write(stdout_stream);
    return;
  }
  std::ofstream f(manifest.dir() / name);
  if (!f) throw std::runtime_error("cannot write " + (manifest.dir() / name).string());
  write(f);
  manifest.artifact(name);
}

int cmd_simulate(const Common& c, const std::string& adv_spec, const std::string& def_spec,
                 bool trace, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  const Config config = resolve_config(c);
  const int episodes = c.episodes.value_or(1);
  if (episodes < 1) throw ConfigError("--episodes must be >= 1");
  const PurePolicy adv = resolve_policy(adv_spec, Player::kAdversary, config);
  const PurePolicy def = resolve_policy(def_spec, Player::kDefender, config);
  Manifest manifest(c.out, "simulate", args, config);

  MtdEnv env(config.env);
  std::ostringstream returns, steps;
  returns << "episode,return_a,return_d,raw_a,raw_d\n" << std::setprecision(17);
  steps << "episode,tau,adv_action,def_action,r_a,r_d,n_c_a,n_c_d,n_d\n" << std::setprecision(17);
  double mean_a = 0.0, mean_d = 0.0;
  for (int k = 0; k < episodes; ++k) {
    const std::uint64_t episode_seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
    Rng ra(derive_seed(episode_seed, "adversary"));
    Rng rd(derive_seed(episode_seed, "defender"));
    StepObserver observer;
    if (trace) {
      observer = [&](const StepRecord& s) {
        steps << k << ',' << s.tau << ',' << action_index(s.adversary) - 1 << ','
              << action_index(s.defender) - 1 << ',' << s.reward_adversary << ','
              << s.reward_defender << ',' << s.counts.adversary << ',' << s.counts.defender << ','
              << s.counts.down << '\n';
      };
    }
    const EpisodeReturns r =
        run_episode(env, adv, def, derive_seed(episode_seed, "env"), ra, rd, observer);
    returns << k << ',' << r.discounted_adversary << ',' << r.discounted_defender << ','
            << r.raw_adversary << ',' << r.raw_defender << '\n';
    mean_a += r.discounted_adversary / episodes;
    mean_d += r.discounted_defender / episodes;
  }
  emit(manifest, "simulate.csv", out, [&](std::ostream& o) { o << returns.str(); });
  if (trace) emit(manifest, "trace.csv", out, [&](std::ostream& o) { o << steps.str(); });
  err << adv.label() << " vs " << def.label() << " over " << episodes
      << " episodes: U_a=" << fixed(mean_a) << " U_d=" << fixed(mean_d) << '\n';
  manifest.finish("ok");
  return kExitOk;
}

int cmd_payoff_table(const Common& c, const std::vector<std::string>& args, std::ostream& out,
                     std::ostream& err) {
  const Config config = resolve_config(c);
  const int episodes = c.episodes.value_or(50);
  if (episodes < 1) throw ConfigError("--episodes must be >= 1");
  Manifest manifest(c.out, "payoff-table", args, config);
  manifest.note("episodes", std::to_string(episodes));
  const EmpiricalGame game =
      build_game(adversary_heuristics(config), defender_heuristics(config),
                 monte_carlo_evaluator(config.env, episodes, config.seed), c.jobs);
  emit(manifest, "payoff_table.csv", out, [&](std::ostream& o) { write_game_csv(o, game); });

  err << std::setw(18) << "adv \\ def";
  for (const auto& l : game.col_labels) err << std::setw(18) << l;
  err << '\n';
  for (int i = 0; i < game.rows(); ++i) {
    err << std::setw(18) << game.row_labels[i];
    for (int j = 0; j < game.cols(); ++j) {
      err << std::setw(18) << (fixed(game.adversary(i, j), 2) + "/" + fixed(game.defender(i, j), 2));
    }
    err << '\n';
  }
  manifest.finish("ok");
  return kExitOk;
}

int cmd_train_br(const Common& c, const std::string& player_name_arg,
                 const std::string& mixture_path, const std::vector<std::string>& args,
                 std::ostream& out, std::ostream& err) {
  const Config config = resolve_config(c);
  const Player learner = parse_player(player_name_arg);
  const Player other = learner == Player::kAdversary ? Player::kDefender : Player::kAdversary;
  Mixture mix;
  try {
    mix = load_mixture(mixture_path, other, config);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  const int eval_episodes = c.episodes.value_or(config.double_oracle.eval_episodes);
  if (eval_episodes < 1) throw ConfigError("--episodes must be >= 1");
  Manifest manifest(c.out, "train-br", args, config);
  const std::string label = learner == Player::kAdversary ? "br_adversary" : "br_defender";

  const BestResponse br =
      train_best_response(learner, mix.policies, mix.strategy, config,
                          derive_seed(config.seed, "oracle:" + label), label,
                          [&err](const LearningPoint& p) {
                            err << "episode " << p.episode << " step " << p.step
                                << " return " << fixed(p.return_discounted, 3) << '\n';
                          });

  double payoff = 0.0;
  for (std::size_t k = 0; k < mix.policies.size(); ++k) {
    if (mix.strategy.weights[k] == 0.0) continue;
    const PurePolicy& opp = mix.policies[k];
    const bool adv = learner == Player::kAdversary;
    const PairEvaluation e = adv ? evaluate_pair(br.policy, opp, config.env, eval_episodes,
                                                 pair_seed(config.seed, label, opp.label()))
                                 : evaluate_pair(opp, br.policy, config.env, eval_episodes,
                                                 pair_seed(config.seed, opp.label(), label));
    payoff += mix.strategy.weights[k] * (adv ? e.adversary : e.defender);
  }

  if (!c.out.empty()) {
    save_policy_file(fs::path(c.out) / (label + ".policy"), br.policy);
    manifest.artifact(label + ".policy");
  }
  emit(manifest, "learning_curve.csv", out, [&](std::ostream& o) {
    o << "step,episode,return_discounted,return_raw\n" << std::setprecision(17);
    for (const auto& p : br.curve) {
      o << p.step << ',' << p.episode << ',' << p.return_discounted << ',' << p.return_raw << '\n';
    }
  });
  manifest.note("greedy_payoff", fixed(payoff, 6));
  err << "greedy " << player_name(learner) << " payoff vs mixture: " << fixed(payoff) << '\n';
  manifest.finish("ok");
  return kExitOk;
}

int cmd_nash(const Common& c, const std::string& game_path, const std::vector<std::string>& args,
             std::ostream& out, std::ostream& err) {
  std::ifstream in(game_path);
  if (!in) throw ConfigError("cannot open game file " + game_path);
  const EmpiricalGame game = read_game_csv(in);
  Manifest manifest(c.out, "nash", args, std::nullopt);
  const EquilibriumResult eq = solve_msne(game);
  emit(manifest, "equilibrium.csv", out,
       [&](std::ostream& o) { write_equilibrium_csv(o, game, eq); });
  err << "value_a=" << fixed(eq.value_a) << " value_d=" << fixed(eq.value_d)
      << " regret_a=" << eq.regret_a << " regret_d=" << eq.regret_d << " (" << eq.method << ")\n";
  manifest.finish("ok");
  return kExitOk;
}

int cmd_solve(const Common& c, const std::string& init, const std::vector<std::string>& args,
              std::ostream& out, std::ostream& err) {
  Config config = resolve_config(c);
  if (c.episodes) config.double_oracle.eval_episodes = *c.episodes;
  config.validate();
  const InitialPolicies mode = parse_initial_policies(init);
  Manifest manifest(c.out, "solve", args, config);
  manifest.note("init", init);
  auto [adversaries, defenders] = initial_policies(config, mode);

  DoOptions options;
  options.jobs = c.jobs;
  options.log = [&err](const std::string& m) { err << m << '\n'; };
  const DoResult result =
      run_double_oracle(config, std::move(adversaries), std::move(defenders), dqn_oracle(config),
                        options);
  const DoState& st = result.state;

  if (!manifest.dir().empty()) {
    const fs::path policies = manifest.dir() / "policies";
    fs::create_directories(policies);
    for (const auto* set : {&st.adversaries, &st.defenders}) {
      for (const auto& p : *set) {
        const std::string name = std::string(player_name(p.player())) + "_" + p.label() + ".policy";
        save_policy_file(policies / name, p);
        manifest.artifact("policies/" + name);
      }
    }
  }
  emit(manifest, "game.csv", out, [&](std::ostream& o) { write_game_csv(o, st.game); });
  emit(manifest, "do_curve.csv", out, [&](std::ostream& o) { write_do_curve(o, st.history); });
  emit(manifest, "equilibrium.csv", out,
       [&](std::ostream& o) { write_equilibrium_csv(o, st.game, result.equilibrium); });
  manifest.note("oracle_calls", std::to_string(st.oracle_calls));
  manifest.note("value_a", fixed(result.equilibrium.value_a, 6));
  manifest.note("value_d", fixed(result.equilibrium.value_d, 6));
  err << (st.converged ? "converged" : "not converged") << " after " << st.oracle_calls
      << " oracle calls: value_a=" << fixed(result.equilibrium.value_a)
      << " value_d=" << fixed(result.equilibrium.value_d) << '\n';
  // A zero-round run only reports the initial equilibrium.
  const bool ok = st.converged || config.double_oracle.max_iterations == 0;
  manifest.finish(ok ? (st.converged ? "converged" : "ok") : "not-converged");
  return ok ? kExitOk : kExitNotConverged;
}

// Re-runs the recorded command against the run's own config.txt.
int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest " + manifest_path);
  std::vector<std::string> recorded;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("arg=", 0) == 0) recorded.push_back(line.substr(4));
  }
  if (recorded.empty()) throw ConfigError("manifest records no command");
  const fs::path config_txt = fs::path(manifest_path).parent_path() / "config.txt";
  std::vector<std::string> args;
  for (std::size_t i = 0; i < recorded.size(); ++i) {
    const std::string& a = recorded[i];
    const bool with_value = a == "--config" || a == "--set" || a == "--seed" || a == "--ne" ||
                            a == "--t" || a == "--out";
    if (with_value) {
      ++i;
      continue;
    }
    if (a.rfind("--config=", 0) == 0 || a.rfind("--set=", 0) == 0 || a.rfind("--seed=", 0) == 0 ||
        a.rfind("--ne=", 0) == 0 || a.rfind("--t=", 0) == 0 || a.rfind("--out=", 0) == 0) {
      continue;
    }
    args.push_back(a);
  }
  if (fs::exists(config_txt)) {
    args.push_back("--config");
    args.push_back(config_txt.string());
  }
  if (!out_dir.empty()) {
    args.push_back("--out");
    args.push_back(out_dir);
  }
  return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moving-target-defense game simulator and equilibrium solver", "mtd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common c;
  std::string adv_spec = "NoOp", def_spec = "NoOp", player, mixture, game, init = "heuristics",
              manifest_path;
  bool trace = false;

  auto* simulate = app.add_subcommand("simulate", "Roll out one adversary/defender pair");
  add_common(simulate, c);
  simulate->add_option("--episodes", c.episodes, "Episodes to roll out (default 1)");
  simulate->add_option("--adversary", adv_spec, "Heuristic name or policy file");
  simulate->add_option("--defender", def_spec, "Heuristic name or policy file");
  simulate->add_flag("--trace", trace, "Also write per-step records");

  auto* payoff = app.add_subcommand("payoff-table", "Evaluate the heuristic payoff grid");
  add_common(payoff, c);
  payoff->add_option("--episodes", c.episodes, "Episodes per cell (default 50)");

  auto* train = app.add_subcommand("train-br", "Train a best response against a mixture");
  add_common(train, c);
  train->add_option("--player", player, "adversary or defender")->required();
  train->add_option("--mixture", mixture, "Opponent mixture file")->required();
  train->add_option("--episodes", c.episodes, "Evaluation episodes per opponent policy");

  auto* nash = app.add_subcommand("nash", "Solve a serialized game CSV");
  add_common(nash, c, false);
  nash->add_option("--game", game, "Game CSV (payoff-table format)")->required();

  auto* solve = app.add_subcommand("solve", "Run the double-oracle loop");
  add_common(solve, c);
  solve->add_option("--episodes", c.episodes, "Evaluation episodes per payoff cell");
  solve->add_option("--init", init, "Initial policy sets")
      ->check(CLI::IsMember({"heuristics", "noop"}));

  auto* replay = app.add_subcommand("replay", "Re-run a recorded command from its manifest");
  replay->add_option("manifest", manifest_path, "manifest.txt of a previous run")->required();
  replay->add_option("--out", c.out, "Output directory for the re-run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(e.get_name() == "--help" && app.get_subcommands().empty()
                        ? ""
                        : (app.get_subcommands().empty() ? "" : app.get_subcommands()[0]->get_name()));
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(c, adv_spec, def_spec, trace, args, out, err);
    if (payoff->parsed()) return cmd_payoff_table(c, args, out, err);
    if (train->parsed()) return cmd_train_br(c, player, mixture, args, out, err);
    if (nash->parsed()) return cmd_nash(c, game, args, out, err);
    if (solve->parsed()) return cmd_solve(c, init, args, out, err);
    if (replay->parsed()) return cmd_replay(manifest_path, c.out, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace mtd::cli
