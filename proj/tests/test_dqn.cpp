#include <cmath>

#include "doctest.h"
#include "mtd/dqn.hpp"
#include "mtd/evaluate.hpp"

using namespace mtd;

namespace {

Experience transition(int inputs, double reward, double fill = 0.0, bool truncated = false) {
  Experience e;
  e.obs = Eigen::VectorXd::Constant(inputs, fill);
  e.next_obs = Eigen::VectorXd::Constant(inputs, fill + 0.5);
  e.reward = reward;
  e.truncated = truncated;
  return e;
}

Config small_config(int episodes, int horizon) {
  Config c;
  c.env.num_servers = 3;
  c.env.horizon = horizon;
  c.train.episodes = episodes;
  return c;
}

bool same_parameters(const QNetwork& a, const QNetwork& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (a.layers()[l].weights != b.layers()[l].weights) return false;
    if (a.layers()[l].bias != b.layers()[l].bias) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  const TrainConfig tc;
  CHECK(epsilon_at(tc, 500000, 0) == 1.0);
  CHECK(epsilon_at(tc, 500000, 50000) == doctest::Approx(0.51).epsilon(1e-12));
  CHECK(epsilon_at(tc, 500000, 100000) == doctest::Approx(0.02));
  CHECK(epsilon_at(tc, 500000, 400000) == doctest::Approx(0.02));
  double prev = 1.0;
  for (long s = 0; s <= 500000; s += 997) {
    const double e = epsilon_at(tc, 500000, s);
    CHECK(e <= prev);
    CHECK(e >= tc.epsilon_final);
    CHECK(e <= 1.0);
    prev = e;
  }
}

TEST_CASE("TD targets") {
  QNetwork net({2, 1});
  net.layers()[0].weights.setZero();
  net.layers()[0].bias << 2.0;
  Experience e = transition(2, 0.5);
  const Experience* batch[] = {&e};
  CHECK(td_targets(batch, net, 0.99)[0] == doctest::Approx(2.48).epsilon(1e-12));
  CHECK(td_targets(batch, net, 0.0)[0] == 0.5);
  e.truncated = true;
  CHECK(td_targets(batch, net, 0.99)[0] == doctest::Approx(2.48).epsilon(1e-12));

  QNetwork zero = QNetwork::for_servers(2, 4);
  Rng rng(1);
  std::vector<Experience> many;
  for (int k = 0; k < 10; ++k) many.push_back(transition(10, uniform01(rng), uniform01(rng)));
  std::vector<const Experience*> ptrs;
  for (const auto& m : many) ptrs.push_back(&m);
  const auto t = td_targets(ptrs, zero, 0.99);
  for (int k = 0; k < 10; ++k) CHECK(t[k] == many[k].reward);
}

TEST_CASE("replay buffer evicts oldest first") {
  ReplayBuffer buf(4);
  for (int k = 0; k < 6; ++k) {
    Experience e = transition(1, k);
    buf.push(std::move(e));
    CHECK(buf.size() <= buf.capacity());
  }
  CHECK(buf.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(buf.at(i).reward == static_cast<double>(i + 2));
  Rng rng(3);
  const auto s = buf.sample(100, rng);
  CHECK(s.size() == 100);
  for (const auto* e : s) CHECK(e->reward >= 2.0);
  CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("train step leaves parameters unchanged on a zero-error batch") {
  QNetwork net({2, 1});
  net.layers()[0].weights << 0.3, -0.2;
  net.layers()[0].bias << 0.1;
  // With gamma=0 the target is the reward; pick rewards equal to predictions.
  std::vector<Experience> data;
  for (double x : {0.0, 1.0, -1.0}) {
    Experience e = transition(2, 0.0, x);
    e.reward = net.forward(e.obs)[0];
    data.push_back(e);
  }
  std::vector<const Experience*> ptrs;
  for (const auto& d : data) ptrs.push_back(&d);
  const QNetwork before = net;
  Optimizer opt(net, {});
  CHECK(train_step(net, opt, ptrs, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK((net.layers()[0].weights - before.layers()[0].weights).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("repeated training on one batch drives the loss down") {
  QNetwork net = QNetwork::for_servers(2, 32);
  Rng rng(4);
  net.initialize(rng);
  std::vector<Experience> data;
  for (int k = 0; k < 16; ++k) {
    Experience e = transition(10, uniform01(rng));
    for (auto& v : e.obs) v = uniform01(rng);
    e.action = uniform_index(rng, 3);
    data.push_back(e);
  }
  std::vector<const Experience*> ptrs;
  for (const auto& d : data) ptrs.push_back(&d);
  Optimizer opt(net, {true, 1e-3});
  double first = 0.0, last = 0.0;
  int increases = 0;
  double prev = 1e300;
  for (int k = 0; k < 1000; ++k) {
    last = train_step(net, opt, ptrs, 0.0);
    if (k == 0) first = last;
    if (k > 100 && last > prev + 1e-12) ++increases;
    prev = last;
  }
  CHECK(last < 0.01 * first);
  CHECK(increases == 0);
}

TEST_CASE("training is deterministic in the seed") {
  const Config c = small_config(3, 60);
  const std::vector<PurePolicy> opp{noop_policy(Player::kDefender, c)};
  const auto a = train_best_response(Player::kAdversary, opp, MixedStrategy::pure(1, 0), c, 5, "x");
  const auto b = train_best_response(Player::kAdversary, opp, MixedStrategy::pure(1, 0), c, 5, "x");
  REQUIRE(a.curve.size() == 3);
  REQUIRE(b.curve.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.curve[k].return_discounted == b.curve[k].return_discounted);
    CHECK(a.curve[k].step == static_cast<long>((k + 1) * 60));
  }
  CHECK(same_parameters(*a.network, *b.network));
  CHECK(a.policy.label() == "x");
  CHECK(a.policy.player() == Player::kAdversary);
  const auto d = train_best_response(Player::kAdversary, opp, MixedStrategy::pure(1, 0), c, 6, "x");
  CHECK_FALSE(same_parameters(*a.network, *d.network));
}

TEST_CASE("full exploration matches a uniformly random policy") {
  Config c = small_config(40, 100);
  c.train.epsilon_final = 1.0;
  const std::vector<PurePolicy> opp{noop_policy(Player::kDefender, c)};
  const auto br = train_best_response(Player::kAdversary, opp, MixedStrategy::pure(1, 0), c, 9, "r");
  double trained = 0.0;
  for (const auto& p : br.curve) trained += p.return_discounted / br.curve.size();

  MtdEnv env(c.env);
  Rng rng(77);
  double baseline = 0.0;
  const int episodes = 400;
  for (int k = 0; k < episodes; ++k) {
    env.reset(derive_seed(1, static_cast<std::uint64_t>(k)));
    double discount = 1.0, ret = 0.0;
    while (!env.done()) {
      const auto s = env.step(action_from_index(uniform_index(rng, 4)), Action::noop());
      ret += discount * s.reward_adversary;
      discount *= c.env.gamma;
    }
    baseline += ret / episodes;
  }
  CHECK(std::abs(trained - baseline) < 1.5);
}

TEST_CASE("defender learner against a mixture") {
  const Config c = small_config(2, 40);
  const std::vector<PurePolicy> opp{noop_policy(Player::kAdversary, c),
                                    PurePolicy::heuristic(Player::kAdversary, HeuristicKind::kUniform,
                                                          c.heuristics, c.env.knowledge_gain)};
  const auto br =
      train_best_response(Player::kDefender, opp, MixedStrategy{{0.5, 0.5}}, c, 1, "d");
  CHECK(br.policy.player() == Player::kDefender);
  CHECK(br.network->all_finite());
  CHECK(br.network->output_size() == 4);
  CHECK_THROWS(train_best_response(Player::kDefender, opp, MixedStrategy{{0.5, 0.4}}, c, 1, "d"));
}
