#include <cmath>

#include "doctest.h"
#include "mtd/env.hpp"

using namespace mtd;

namespace {

constexpr double kUa = 0.2689414213699951;  // logistic at x=0
constexpr double kUd = 0.9820137900379085;  // logistic at x=1

}  // namespace

TEST_CASE("compromise probability") {
  CHECK(compromise_probability(0, 0.05) == doctest::Approx(0.048771).epsilon(1e-6));
  CHECK(compromise_probability(7, 0.05) == doctest::Approx(0.329680).epsilon(1e-6));
  double prev = 0.0;
  for (int rho = 0; rho <= 100; ++rho) {
    const double p = compromise_probability(rho, 0.05);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  CHECK(compromise_probability(2000, 0.05) == doctest::Approx(1.0));
}

TEST_CASE("sigmoid") {
  const SigmoidParams theta{5.0, 0.2};
  CHECK(sigmoid(0.2, theta) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sigmoid(1.0, theta) == doctest::Approx(0.982014).epsilon(1e-6));
  CHECK(sigmoid(0.0, theta) == doctest::Approx(0.268941).epsilon(1e-6));
}

TEST_CASE("utility") {
  EnvConfig c;
  CHECK(utility(Player::kDefender, 10, 0, c) == doctest::Approx(kUd).epsilon(1e-12));
  CHECK(utility(Player::kAdversary, 0, 0, c) == doctest::Approx(kUa).epsilon(1e-12));
  c.w_adversary = 1.0;
  c.w_defender = 1.0;
  CHECK(utility(Player::kAdversary, 5, 0, c) == doctest::Approx(0.817574).epsilon(1e-6));
  CHECK(utility(Player::kDefender, 10, 0, c) == doctest::Approx(kUd));
  CHECK(utility(Player::kAdversary, 6, 4, c) == doctest::Approx(sigmoid(0.6, c.theta_adversary)));
}

TEST_CASE("config validation rejects invalid values") {
  EnvConfig c;
  c.gamma = 1.0;
  CHECK_THROWS(MtdEnv(c));
  c = EnvConfig{};
  c.num_servers = 0;
  CHECK_THROWS(MtdEnv(c));
  c = EnvConfig{};
  c.miss_probability = 1.5;
  CHECK_THROWS(MtdEnv(c));
  c = EnvConfig{};
  c.knowledge_gain = 0.0;
  CHECK_THROWS(MtdEnv(c));
}

TEST_CASE("reset gives the initial state deterministically") {
  MtdEnv env(EnvConfig{});
  env.reset(42);
  REQUIRE(env.servers().size() == 10);
  for (const auto& s : env.servers()) {
    CHECK(s.probes == 0);
    CHECK(s.controller == Player::kDefender);
    CHECK(s.up());
  }
  const Observation d = env.observe(Player::kDefender);
  CHECK(d.values.size() == 50);
  for (int i = 0; i < 10; ++i) {
    CHECK(d.status(i) == 1);
    CHECK(d.time_to_up(i) == 0);
    CHECK(d.progress(i) == 0);
  }
  const Observation a1 = env.observe(Player::kAdversary);
  env.step(Action::at(3), Action::at(5));
  env.reset(42);
  CHECK(env.observe(Player::kAdversary) == a1);
  CHECK(env.observe(Player::kDefender) == d);
}

TEST_CASE("no-op step keeps state and pays the base utility") {
  MtdEnv env(EnvConfig{});
  env.reset(1);
  const StepOutcome o = env.step(Action::noop(), Action::noop());
  CHECK(o.reward_adversary == doctest::Approx(kUa).epsilon(1e-12));
  CHECK(o.reward_defender == doctest::Approx(kUd).epsilon(1e-12));
  CHECK(env.counts().defender == 10);
  CHECK(env.tau() == 1);
  CHECK_FALSE(o.done);
}

TEST_CASE("out-of-range actions are rejected") {
  MtdEnv env(EnvConfig{});
  CHECK_THROWS_AS(env.step(Action::at(10), Action::noop()), std::out_of_range);
  CHECK_THROWS_AS(env.step(Action::noop(), Action::at(-1)), std::out_of_range);
}

TEST_CASE("reimaged server is down for exactly delta reward evaluations") {
  MtdEnv env(EnvConfig{});
  env.reset(3);
  int down_rewards = 0;
  StepOutcome o = env.step(Action::noop(), Action::at(0));
  down_rewards += env.counts().down;
  for (int t = 1; t < 20; ++t) {
    o = env.step(Action::noop(), Action::noop());
    down_rewards += env.counts().down;
    if (env.tau() <= 7) CHECK_FALSE(env.servers()[0].up());
    if (env.tau() == 8) {
      CHECK(env.servers()[0].up());
      CHECK(env.servers()[0].probes == 0);
      CHECK(env.servers()[0].controller == Player::kDefender);
    }
  }
  CHECK(down_rewards == 7);
}

TEST_CASE("forced compromise flips control") {
  MtdEnv env(EnvConfig{});
  env.reset(0);
  env.set_compromise_draw_for_testing(0.0);
  const StepOutcome o = env.step(Action::at(2), Action::noop());
  CHECK(env.servers()[2].controller == Player::kAdversary);
  CHECK(env.servers()[2].probes == 1);
  CHECK(o.obs_adversary.control(2) == 1);
  CHECK(o.obs_adversary.progress(2) == 1);
  CHECK(o.reward_adversary == doctest::Approx(sigmoid(0.1, EnvConfig{}.theta_adversary) - 0.2));

  env.set_compromise_draw_for_testing(0.999999);
  env.step(Action::at(4), Action::noop());
  CHECK(env.servers()[4].controller == Player::kDefender);
}

TEST_CASE("adversary progress is stale after an unseen reimage") {
  MtdEnv env(EnvConfig{});
  env.reset(0);
  env.set_compromise_draw_for_testing(0.999999);
  env.step(Action::at(1), Action::noop());
  env.step(Action::at(1), Action::noop());
  env.step(Action::noop(), Action::at(1));
  const Observation a = env.observe(Player::kAdversary);
  CHECK(a.progress(1) == 2);
  CHECK(a.status(1) == 1);
  CHECK(env.observe(Player::kDefender).progress(1) == 0);
}

TEST_CASE("probing a down server reveals the remaining downtime") {
  MtdEnv env(EnvConfig{});
  env.reset(0);
  env.step(Action::noop(), Action::at(6));  // reimaged at t0=0
  env.step(Action::noop(), Action::noop());
  env.step(Action::noop(), Action::noop());
  const StepOutcome o = env.step(Action::at(6), Action::noop());
  CHECK(o.obs_adversary.status(6) == 0);
  CHECK(o.obs_adversary.time_to_up(6) == 7 - (env.tau() - 0));
  CHECK(o.obs_adversary.progress(6) == 0);
  // Under these weights a down server counts toward the adversary's utility.
  CHECK(o.reward_adversary == doctest::Approx(sigmoid(0.1, EnvConfig{}.theta_adversary) - 0.2));
  CHECK(env.servers()[6].controller == Player::kDefender);
}

TEST_CASE("miss probability extremes") {
  EnvConfig c;
  c.miss_probability = 1.0;
  MtdEnv env(c);
  env.reset(5);
  env.set_compromise_draw_for_testing(0.999999);
  for (int t = 0; t < 5; ++t) env.step(Action::at(0), Action::noop());
  CHECK(env.observe(Player::kDefender).progress(0) == 0);
  CHECK(env.servers()[0].probes == 5);
}

TEST_CASE("episode ends at the horizon") {
  EnvConfig c;
  c.horizon = 3;
  MtdEnv env(c);
  env.reset(0);
  CHECK_FALSE(env.step(Action::noop(), Action::noop()).done);
  CHECK_FALSE(env.step(Action::noop(), Action::noop()).done);
  CHECK(env.step(Action::noop(), Action::noop()).done);
  CHECK_THROWS_AS(env.step(Action::noop(), Action::noop()), std::logic_error);
}

TEST_CASE("random-action fuzz preserves the invariants") {
  for (double nu : {0.0, 0.3, 1.0}) {
    EnvConfig c;
    c.miss_probability = nu;
    c.horizon = 500;
    MtdEnv env(c);
    Rng rng(derive_seed(7, "fuzz"));
    std::vector<int> down_since(10, -1);
    std::vector<int> prev_probes(10, 0);
    int violations = 0;
    for (int ep = 0; ep < 40; ++ep) {
      env.reset(derive_seed(9, static_cast<std::uint64_t>(ep)));
      std::fill(down_since.begin(), down_since.end(), -1);
      std::fill(prev_probes.begin(), prev_probes.end(), 0);
      while (!env.done()) {
        const Action a = action_from_index(uniform_index(rng, 11));
        const Action d = action_from_index(uniform_index(rng, 11));
        const bool adv_noop = a.is_noop();
        const int reimaged = d.target.value_or(-1);
        const bool was_up = reimaged >= 0 && env.servers()[reimaged].up();
        const int before = env.tau();
        const StepOutcome o = env.step(a, d);
        const ControlCounts k = env.counts();
        if (k.adversary + k.defender + k.down != 10) ++violations;
        if (!(o.reward_defender > 0.0 && o.reward_defender < 1.0)) ++violations;
        if (!(o.reward_adversary > -c.probe_cost && o.reward_adversary < 1.0)) ++violations;
        if (adv_noop && o.reward_adversary != utility(Player::kAdversary, k.adversary, k.down, c)) {
          ++violations;
        }
        if (was_up) down_since[reimaged] = before;
        const Observation od = env.observe(Player::kDefender);
        const Observation oa = env.observe(Player::kAdversary);
        if (od.values.size() != 50 || oa.values.size() != 50) ++violations;
        for (int i = 0; i < 10; ++i) {
          const ServerState& s = env.servers()[i];
          if (down_since[i] >= 0) {
            const bool should_be_down = env.tau() - down_since[i] <= c.downtime;
            if (s.up() == should_be_down) ++violations;
            if (!should_be_down) down_since[i] = -1;
          }
          if (s.up() && s.probes < prev_probes[i] && !(was_up && reimaged == i) &&
              !(s.probes == 0 && s.controller == Player::kDefender)) {
            ++violations;
          }
          prev_probes[i] = s.probes;
          for (const Observation* obs : {&od, &oa}) {
            for (int f = 0; f < kObsFields; ++f) {
              if (obs->field(i, f) < 0) ++violations;
            }
            if (obs->status(i) == 1 && obs->time_to_up(i) != 0) ++violations;
          }
          if (nu == 0.0 && od.progress(i) != s.probes) ++violations;
          if (nu == 1.0 && od.progress(i) != 0) ++violations;
          if (od.progress(i) > s.probes) ++violations;
        }
      }
    }
    CHECK(violations == 0);
  }
}
