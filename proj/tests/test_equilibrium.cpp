#include <sstream>

#include "doctest.h"
#include "mtd/equilibrium.hpp"

using namespace mtd;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

void check_distribution(const MixedStrategy& s) {
  double total = 0.0;
  for (double w : s.weights) {
    CHECK(w >= 0.0);
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("matching pennies has the uniform equilibrium") {
  const Eigen::MatrixXd a = mat({{1, -1}, {-1, 1}});
  const EquilibriumResult eq = solve_msne(make_game(a, -a));
  CHECK(eq.sigma_a.weights == std::vector<double>{0.5, 0.5});
  CHECK(eq.sigma_d.weights == std::vector<double>{0.5, 0.5});
  CHECK(eq.value_a == doctest::Approx(0.0));
  CHECK(eq.regret_a <= 1e-12);
  CHECK(eq.regret_d <= 1e-12);
}

TEST_CASE("prisoners dilemma resolves to mutual defection") {
  // Strategy 0 cooperates, 1 defects.
  const Eigen::MatrixXd a = mat({{3, 0}, {5, 1}});
  const EquilibriumResult eq = solve_msne(make_game(a, a.transpose()));
  CHECK(eq.sigma_a.weights == std::vector<double>{0.0, 1.0});
  CHECK(eq.sigma_d.weights == std::vector<double>{0.0, 1.0});
  CHECK(eq.value_a == 1.0);
  CHECK(eq.regret_a == 0.0);
  CHECK(eq.regret_d == 0.0);
}

TEST_CASE("one by one game") {
  const EquilibriumResult eq = solve_msne(make_game(mat({{26.8929}}), mat({{98.1972}})));
  CHECK(eq.sigma_a.weights == std::vector<double>{1.0});
  CHECK(eq.sigma_d.weights == std::vector<double>{1.0});
  CHECK(eq.value_a == 26.8929);
  CHECK(eq.value_d == 98.1972);
}

TEST_CASE("mixed utility is the bilinear form") {
  const EmpiricalGame g = make_game(mat({{1, 0}, {0, 1}}), mat({{2, 3}, {4, 5}}));
  auto [ua, ud] = mixed_utility(g, MixedStrategy::uniform(2), MixedStrategy::uniform(2));
  CHECK(ua == doctest::Approx(0.5));
  CHECK(ud == doctest::Approx(3.5));
  std::tie(ua, ud) = mixed_utility(g, MixedStrategy::pure(2, 1), MixedStrategy::pure(2, 0));
  CHECK(ua == 0.0);
  CHECK(ud == 4.0);
  const EmpiricalGame c = make_game(Eigen::MatrixXd::Constant(3, 2, 7.0),
                                    Eigen::MatrixXd::Constant(3, 2, -2.0));
  std::tie(ua, ud) = mixed_utility(c, MixedStrategy{{0.2, 0.3, 0.5}}, MixedStrategy{{0.9, 0.1}});
  CHECK(ua == doctest::Approx(7.0));
  CHECK(ud == doctest::Approx(-2.0));
  CHECK_THROWS_AS(mixed_utility(g, MixedStrategy::uniform(3), MixedStrategy::uniform(2)),
                  std::invalid_argument);
}

TEST_CASE("regret examples") {
  const Eigen::MatrixXd a = mat({{1, -1}, {-1, 1}});
  const EmpiricalGame pennies = make_game(a, -a);
  auto [ra, rd] = regret(pennies, MixedStrategy::pure(2, 0), MixedStrategy::uniform(2));
  CHECK(ra == doctest::Approx(0.0));
  const EmpiricalGame column = make_game(mat({{1}, {0}}), mat({{0}, {0}}));
  std::tie(ra, rd) = regret(column, MixedStrategy::pure(2, 1), MixedStrategy::pure(1, 0));
  CHECK(ra == doctest::Approx(1.0));
  CHECK(rd == 0.0);
}

TEST_CASE("random bimatrices pass the regret verifier") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 2 + uniform_index(rng, 5);
    const int n = 2 + uniform_index(rng, 5);
    Eigen::MatrixXd a(m, n), d(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        a(i, j) = uniform01(rng);
        d(i, j) = uniform01(rng);
      }
    }
    const EmpiricalGame g = make_game(a, d);
    const EquilibriumResult eq = solve_msne(g, 1e-6);
    check_distribution(eq.sigma_a);
    check_distribution(eq.sigma_d);
    const auto [ra, rd] = regret(g, eq.sigma_a, eq.sigma_d);
    REQUIRE(ra <= 1e-6);
    REQUIRE(rd <= 1e-6);
    const auto [ua, ud] = mixed_utility(g, eq.sigma_a, eq.sigma_d);
    CHECK(eq.value_a == doctest::Approx(ua).epsilon(1e-9));
    CHECK(eq.value_d == doctest::Approx(ud).epsilon(1e-9));

    // Positive affine transform of the adversary's payoffs.
    const EmpiricalGame t = make_game(3.0 * a.array() + 5.0, d);
    const auto [ta, td] = regret(t, eq.sigma_a, eq.sigma_d);
    CHECK(ta <= 3.0 * 1e-6);
    CHECK(td <= 1e-6);
  }
}

TEST_CASE("degenerate games still solve") {
  const EmpiricalGame ties = make_game(Eigen::MatrixXd::Ones(4, 3), Eigen::MatrixXd::Ones(4, 3));
  const EquilibriumResult eq = solve_msne(ties);
  CHECK(eq.regret_a == 0.0);
  CHECK(eq.regret_d == 0.0);
  const EmpiricalGame shared = make_game(mat({{3, 3}, {2, 5}, {0, 6}}), mat({{3, 2}, {2, 6}, {3, 1}}));
  const EquilibriumResult e2 = solve_msne(shared);
  CHECK(e2.regret_a <= 1e-9);
  CHECK(e2.regret_d <= 1e-9);
}

TEST_CASE("every Lemke-Howson label and support enumeration agree on validity") {
  const EmpiricalGame g = make_game(mat({{3, 1, 0}, {0, 2, 1}, {1, 0, 3}}),
                                    mat({{1, 0, 3}, {3, 1, 0}, {0, 3, 1}}));
  for (int k = 0; k < 6; ++k) {
    auto [x, y] = lemke_howson(g.adversary, g.defender, k);
    const auto [ra, rd] = regret(g, MixedStrategy{x}, MixedStrategy{y});
    CHECK(ra <= 1e-9);
    CHECK(rd <= 1e-9);
  }
  MixedStrategy x, y;
  REQUIRE(support_enumeration(g, 1e-9, x, y));
  const auto [ra, rd] = regret(g, x, y);
  CHECK(ra <= 1e-9);
  CHECK(rd <= 1e-9);
}

TEST_CASE("game CSV round trip") {
  EmpiricalGame g = make_game(mat({{1.0 / 3.0, 2}, {3, 4}, {5, 6.25}}), mat({{7, 8}, {9, 10}, {11, 1e-17}}));
  g.se_adversary(1, 1) = 0.125;
  std::stringstream ss;
  write_game_csv(ss, g);
  const EmpiricalGame back = read_game_csv(ss);
  CHECK(back.row_labels == g.row_labels);
  CHECK(back.col_labels == g.col_labels);
  CHECK(back.adversary == g.adversary);
  CHECK(back.defender == g.defender);
  CHECK(back.se_adversary == g.se_adversary);

  std::stringstream missing("adv_policy,def_policy,u_a,u_d,se_a,se_d\na,b,1,2,0,0\nc,d,1,2,0,0\n");
  CHECK_THROWS_AS(read_game_csv(missing), std::invalid_argument);
  std::stringstream header("a,b\n");
  CHECK_THROWS_AS(read_game_csv(header), std::invalid_argument);
}

TEST_CASE("extending a game evaluates only new cells") {
  Config config;
  std::vector<PurePolicy> adv = adversary_heuristics(config);
  std::vector<PurePolicy> def = defender_heuristics(config);
  int calls = 0;
  PairEvaluator counting = [&](const PurePolicy& a, const PurePolicy& d) {
    ++calls;
    PairEvaluation e;
    e.adversary = static_cast<double>(a.label().size());
    e.defender = static_cast<double>(d.label().size());
    return e;
  };
  std::vector<PurePolicy> a2(adv.begin(), adv.begin() + 2);
  std::vector<PurePolicy> d3(def.begin(), def.begin() + 3);
  EmpiricalGame g = build_game(a2, d3, counting);
  CHECK(calls == 6);
  a2.push_back(adv[2]);
  d3.push_back(def[3]);
  CHECK(extend_game(g, a2, d3, counting) == 2 + 3 + 1);
  CHECK(calls == 12);
  CHECK(g.rows() == 3);
  CHECK(g.cols() == 4);
  std::vector<PurePolicy> wrong{adv[1], adv[0], adv[2]};
  CHECK_THROWS_AS(extend_game(g, wrong, d3, counting), std::invalid_argument);
}

TEST_CASE("parallel and serial game builds are identical") {
  Config config;
  config.env.horizon = 60;
  const PairEvaluator eval = monte_carlo_evaluator(config.env, 3, 17);
  const EmpiricalGame serial =
      build_game(adversary_heuristics(config), defender_heuristics(config), eval, 1);
  const EmpiricalGame parallel =
      build_game(adversary_heuristics(config), defender_heuristics(config), eval, 4);
  CHECK(serial.adversary == parallel.adversary);
  CHECK(serial.defender == parallel.defender);
  CHECK(serial.se_defender == parallel.se_defender);
}
