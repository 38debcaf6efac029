#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mtd/serialize.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

Observation random_obs(Player p, int m, Rng& rng) {
  Observation o{p, {}};
  for (int i = 0; i < m; ++i) {
    const int status = uniform_index(rng, 2);
    o.values.insert(o.values.end(), {status, status ? 0 : uniform_index(rng, 8),
                                     uniform_index(rng, 40), uniform_index(rng, 2),
                                     uniform_index(rng, 150)});
  }
  return o;
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mtd_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("q-network policy round trip preserves greedy actions") {
  const Config c;
  auto net = std::make_shared<QNetwork>(QNetwork::for_servers(10, 32));
  Rng init(3);
  net->initialize(init);
  const PurePolicy p = PurePolicy::q_network(Player::kAdversary, net, 7, "n");
  std::stringstream buf;
  save_policy(buf, p);
  CHECK(buf.str().rfind("MTDPOLICY 1 qnet adversary 10\n", 0) == 0);
  const PurePolicy q = load_policy(buf, c, "n2");
  CHECK(q.label() == "n2");
  REQUIRE(q.as_q_network());
  const auto& a = net->layers();
  const auto& b = q.as_q_network()->network->layers();
  REQUIRE(a.size() == b.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(a[l].weights == b[l].weights);
    CHECK(a[l].bias == b[l].bias);
  }
  Rng rng(9), r1(1), r2(1);
  int mismatches = 0;
  for (int k = 0; k < 10000; ++k) {
    const Observation o = random_obs(Player::kAdversary, 10, rng);
    if (!(p.act(o, k, r1) == q.act(o, k, r2))) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("heuristic policy line") {
  const Config c;
  const PurePolicy p = PurePolicy::heuristic(Player::kDefender, HeuristicKind::kPcp, c.heuristics,
                                             c.env.knowledge_gain);
  std::stringstream buf;
  save_policy(buf, p);
  CHECK(buf.str().rfind("heuristic defender PCP ", 0) == 0);
  CHECK(buf.str().find("pcp_threshold=7") != std::string::npos);
  const PurePolicy q = load_policy(buf, c, "");
  REQUIRE(q.as_heuristic());
  CHECK(q.as_heuristic()->kind == HeuristicKind::kPcp);
  CHECK(q.label() == "PCP");
  CHECK(q.player() == Player::kDefender);

  std::istringstream custom("heuristic adversary Uniform p_a=3 alpha=0.1\n");
  const PurePolicy u = load_policy(custom, c, "");
  CHECK(u.as_heuristic()->params.adversary_period == 3);
  CHECK(u.as_heuristic()->knowledge_gain == 0.1);
}

TEST_CASE("malformed policy files are rejected") {
  const Config c;
  auto load = [&c](const std::string& text) {
    std::istringstream in(text);
    return load_policy(in, c, "");
  };
  CHECK_THROWS_AS(load(""), FormatError);
  CHECK_THROWS_AS(load("garbage\n"), FormatError);
  CHECK_THROWS_AS(load("heuristic adversary Uniform p_a=x\n"), FormatError);
  CHECK_THROWS_AS(load("heuristic adversary Uniform bogus=1\n"), FormatError);
  CHECK_THROWS_AS(load("MTDPOLICY 1 qnet adversary 3\n"), FormatError);
  CHECK_THROWS_AS(load("MTDPOLICY 1 qnet adversary 10\n2 1\n1 2\n0 0\n"), FormatError);
  CHECK_THROWS_AS(load("MTDPOLICY 1 qnet adversary 1\n2 5\n1 2 3\n0 0\n"), FormatError);
  CHECK_THROWS_AS(load("MTDPOLICY 1 qnet adversary 1\n2 5\n1 2 3 4 5 6 7 8 9 nan\n0 0\n"),
                  FormatError);
}

TEST_CASE("mixture files") {
  const Config c;
  const fs::path dir = temp_dir("mixture");
  auto net = std::make_shared<QNetwork>(QNetwork::for_servers(10, 4));
  save_policy_file(dir / "learned.policy",
                   PurePolicy::q_network(Player::kDefender, net, 7, "learned"));
  save_policy_file(dir / "adv.policy",
                   PurePolicy::q_network(Player::kAdversary, net, 7, "adv"));
  std::ofstream(dir / "ok.txt") << "# opponents\n0.25 heuristic:NoOp\n\n0.75 learned.policy\n";
  const Mixture m = load_mixture(dir / "ok.txt", Player::kDefender, c);
  REQUIRE(m.policies.size() == 2);
  CHECK(m.policies[0].label() == "NoOp");
  CHECK(m.policies[1].label() == "learned");
  CHECK(m.strategy.weights == std::vector<double>{0.25, 0.75});

  std::ofstream(dir / "sum.txt") << "0.5 heuristic:NoOp\n0.4 heuristic:PCP\n";
  CHECK_THROWS_AS(load_mixture(dir / "sum.txt", Player::kDefender, c), FormatError);
  std::ofstream(dir / "missing.txt") << "1 nothere.policy\n";
  CHECK_THROWS_AS(load_mixture(dir / "missing.txt", Player::kDefender, c), FormatError);
  std::ofstream(dir / "side.txt") << "1 adv.policy\n";
  CHECK_THROWS_AS(load_mixture(dir / "side.txt", Player::kDefender, c), FormatError);
  std::ofstream(dir / "empty.txt") << "# nothing\n";
  CHECK_THROWS_AS(load_mixture(dir / "empty.txt", Player::kDefender, c), FormatError);
  std::ofstream(dir / "bad.txt") << "x heuristic:NoOp\n";
  CHECK_THROWS_AS(load_mixture(dir / "bad.txt", Player::kDefender, c), FormatError);
  fs::remove_all(dir);
}
