#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using mtd::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mtd_cli_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(invoke({}).code == mtd::cli::kExitConfig);
  CHECK(invoke({"frobnicate"}).code == mtd::cli::kExitConfig);
  CHECK(invoke({"simulate", "--set", "gamma=1.0"}).code == mtd::cli::kExitConfig);
  CHECK(invoke({"simulate", "--adversary", "Nope"}).code == mtd::cli::kExitConfig);
  CHECK(invoke({"simulate", "--adversary", "PCP"}).code != mtd::cli::kExitOk);
  CHECK(invoke({"nash", "--game", "/nonexistent/game.csv"}).code == mtd::cli::kExitConfig);
  CHECK(invoke({"--version"}).out == std::string(mtd::cli::kVersion) + "\n");
  CHECK(invoke({"--help"}).code == mtd::cli::kExitOk);
}

TEST_CASE("simulate prints the closed-form NoOp returns") {
  const Result r = invoke({"simulate", "--episodes", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("episode,return_a,return_d,raw_a,raw_d\n0,26.89298108", 0) == 0);
}

TEST_CASE("payoff table, nash and replay") {
  const fs::path dir = fresh("table");
  REQUIRE(invoke({"payoff-table", "--episodes", "2", "--t", "50", "--out", dir.string()}).code == 0);
  const std::string table = slurp(dir / "payoff_table.csv");
  CHECK(table.rfind("adv_policy,def_policy,u_a,u_d,se_a,se_d\nNoOp,NoOp,", 0) == 0);
  const std::string manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.find("status=ok") != std::string::npos);
  CHECK(manifest.find("subcommand=payoff-table") != std::string::npos);
  CHECK(manifest.find("artifact=payoff_table.csv") != std::string::npos);

  const fs::path eq = fresh("nash");
  REQUIRE(invoke({"nash", "--game", (dir / "payoff_table.csv").string(), "--out", eq.string()})
              .code == 0);
  CHECK(slurp(eq / "equilibrium.csv").rfind("player,policy_label,probability\n", 0) == 0);

  const fs::path again = fresh("replay");
  REQUIRE(invoke({"replay", (dir / "manifest.txt").string(), "--out", again.string()}).code == 0);
  CHECK(slurp(again / "payoff_table.csv") == table);
  for (const auto& d : {dir, eq, again}) fs::remove_all(d);
}

TEST_CASE("train-br and solve write their artifacts") {
  const fs::path base = fresh("train");
  fs::create_directories(base);
  std::ofstream(base / "mix.txt") << "1 heuristic:NoOp\n";
  const fs::path out = base / "br";
  REQUIRE(invoke({"train-br", "--player", "defender", "--mixture", (base / "mix.txt").string(),
                  "--ne", "2", "--t", "40", "--episodes", "2", "--out", out.string()})
              .code == 0);
  CHECK(fs::exists(out / "br_defender.policy"));
  const std::string curve = slurp(out / "learning_curve.csv");
  CHECK(curve.rfind("step,episode,return_discounted,return_raw\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);

  std::ofstream(base / "bad.txt") << "0.5 heuristic:NoOp\n0.4 heuristic:PCP\n";
  CHECK(invoke({"train-br", "--player", "adversary", "--mixture", (base / "bad.txt").string()})
            .code == mtd::cli::kExitConfig);

  const fs::path run_dir = base / "solve";
  const Result s = invoke({"solve", "--init", "noop", "--ne", "2", "--t", "40", "--episodes", "2",
                           "--set", "max_iterations=1", "--set", "eps_do=1000", "--out",
                           run_dir.string()});
  CHECK(s.code == 0);
  for (const char* f : {"game.csv", "do_curve.csv", "config.txt", "equilibrium.csv",
                        "manifest.txt", "policies/defender_dqn_d1.policy"}) {
    CHECK(fs::exists(run_dir / f));
  }

  const fs::path zero = base / "zero";
  CHECK(invoke({"solve", "--init", "noop", "--t", "40", "--episodes", "2", "--set",
                "max_iterations=0", "--out", zero.string()})
            .code == 0);
  CHECK(slurp(zero / "do_curve.csv").find("\n1,") == std::string::npos);

  const Result nc = invoke({"solve", "--init", "noop", "--ne", "2", "--t", "40", "--episodes", "2",
                            "--set", "max_iterations=1", "--set", "eps_do=0", "--out",
                            (base / "nc").string()});
  if (nc.code != 0) {
    CHECK(nc.code == mtd::cli::kExitNotConverged);
    CHECK(slurp(base / "nc" / "manifest.txt").find("status=not-converged") != std::string::npos);
  }
  fs::remove_all(base);
}
