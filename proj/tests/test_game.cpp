// Copyright 2025 The mgsolve Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "mg/game.hpp"

using namespace mg;

namespace {

MarkovPolicy random_policy(const MarkovGame& game, int player, std::mt19937_64& rng) {
  MarkovPolicy p = MarkovPolicy::Uniform(game, player);
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  for (int h = 1; h <= game.horizon; ++h)
    for (int s = 0; s < game.num_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < p.num_actions; ++a) sum += (p.at(h, s, a) = unif(rng));
      for (int a = 0; a < p.num_actions; ++a) p.at(h, s, a) /= sum;
    }
  return p;
}

// Monte Carlo estimate of V_1^{mu,nu}(s_1) with a running variance.
std::pair<double, double> rollout_value(const MarkovGame& game, const MarkovPolicy& mu,
                                        const MarkovPolicy& nu, int episodes,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double mean = 0.0, m2 = 0.0;
  for (int ep = 1; ep <= episodes; ++ep) {
    int s = game.initial_state;
    double ret = 0.0;
    for (int h = 1; h <= game.horizon; ++h) {
      auto draw = [&](const MarkovPolicy& p) {
        double u = unif(rng);
        int a = 0;
        for (; a < p.num_actions - 1; ++a) {
          u -= p.at(h, s, a);
          if (u <= 0.0) break;
        }
        return a;
      };
      const int a = draw(mu), b = draw(nu);
      ret += game.r2(h, s, a, b);
      double u = unif(rng);
      int next = game.num_states - 1;
      for (int sp = 0; sp < game.num_states; ++sp) {
        u -= game.p(h, s, a * game.b_count() + b, sp);
        if (u <= 0.0) {
          next = sp;
          break;
        }
      }
      s = next;
    }
    const double d = ret - mean;
    mean += d / ep;
    m2 += d * (ret - mean);
  }
  const double var = m2 / (episodes - 1);
  return {mean, std::sqrt(var / episodes)};
}

}  // namespace

TEST_SUITE_BEGIN("game");

TEST_CASE("two-layer example matches its known solution") {
  auto [game, init] = make_two_layer_example();
  game.validate();
  init.mu.validate();
  init.nu.validate();

  NashSolution nash = nash_values(game);
  CHECK(nash.values.v_at(1, 0) == doctest::Approx(0.55).epsilon(1e-12));
  for (int s = 1; s <= 4; ++s)
    CHECK(nash.values.v_at(2, s) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nash.values.q_at(1, 0, 0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(nash.values.q_at(1, 0, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nash.values.q_at(1, 0, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(nash.values.q_at(1, 0, 1, 1) == doctest::Approx(0.6).epsilon(1e-12));

  // All initialization entries lie within [0.15, 0.85].
  for (const MarkovPolicy* p : {&init.mu, &init.nu})
    for (double x : p->dist) {
      CHECK(x >= 0.15);
      CHECK(x <= 0.85);
    }

  // Nash policies close the gap; the initialization does not.
  CHECK(ne_gap(game, nash.mu, nash.nu) <= 1e-9);
  CHECK(ne_gap(game, init.mu, init.nu) > 1e-3);

  // Best response against the Nash opponent recovers the game value.
  BestResponse br = best_response_value(game, nash.nu, 0);
  CHECK(br.values.v_at(1, 0) == doctest::Approx(0.55).epsilon(1e-9));
}

TEST_CASE("bellman backup") {
  auto [game, init] = make_two_layer_example();
  const int S = game.num_states;
  std::vector<double> v_next(S, 0.0);
  std::vector<double> uniform_a(S * 2, 0.5), uniform_b(S * 2, 0.5);

  SUBCASE("uniform layer-2 value is one half") {
    auto [q, v] = bellman_backup(game, 2, v_next, uniform_a, uniform_b);
    for (int s = 1; s < S; ++s) CHECK(v[s] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("zero rewards reduce to transition averaging") {
    MarkovGame zero = game;
    std::fill(zero.reward.begin(), zero.reward.end(), 0.0);
    std::vector<double> vn(S);
    for (int s = 0; s < S; ++s) vn[s] = 0.1 * s;
    auto [q, v] = bellman_backup(zero, 1, vn, uniform_a, uniform_b);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double expect = 0.0;
          for (int sp = 0; sp < S; ++sp) expect += zero.p(1, s, a * 2 + b, sp) * vn[sp];
          CHECK(q[(s * 2 + a) * 2 + b] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
  }

  SUBCASE("random game agrees with direct triple-loop summation") {
    MarkovGame rnd = make_random_game(3, 3, 4, {2, 2}, 2, true);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> vn(4);
    for (double& x : vn) x = unif(rng);
    std::vector<double> ma(4 * 2), mb(4 * 2);
    for (int s = 0; s < 4; ++s) {
      ma[s * 2] = unif(rng);
      ma[s * 2 + 1] = 1.0 - ma[s * 2];
      mb[s * 2] = unif(rng);
      mb[s * 2 + 1] = 1.0 - mb[s * 2];
    }
    auto [q, v] = bellman_backup(rnd, 2, vn, ma, mb);
    for (int s = 0; s < 4; ++s) {
      double expect_v = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double expect_q = rnd.r2(2, s, a, b);
          for (int sp = 0; sp < 4; ++sp) expect_q += rnd.p(2, s, a * 2 + b, sp) * vn[sp];
          CHECK(q[(s * 2 + a) * 2 + b] == doctest::Approx(expect_q).epsilon(1e-12));
          expect_v += ma[s * 2 + a] * mb[s * 2 + b] * expect_q;
        }
      CHECK(v[s] == doctest::Approx(expect_v).epsilon(1e-12));
    }
  }

  SUBCASE("shape mismatch throws") {
    std::vector<double> bad(S + 1, 0.0);
    CHECK_THROWS_AS(bellman_backup(game, 1, bad, uniform_a, uniform_b), mg::Error);
  }
}

TEST_CASE("policy_eval") {
  auto [game, init] = make_two_layer_example();

  SUBCASE("Nash policy evaluates to the game value") {
    NashSolution nash = nash_values(game);
    ValueTables v = policy_eval(game, nash.mu, nash.nu);
    CHECK(v.v_at(1, 0) == doctest::Approx(0.55).epsilon(1e-12));
  }

  SUBCASE("H=1 game reduces to a bilinear form") {
    MarkovGame g1 = make_random_game(11, 1, 3, {2, 3}, 2, true);
    std::mt19937_64 rng(13);
    MarkovPolicy mu = random_policy(g1, 0, rng);
    MarkovPolicy nu = random_policy(g1, 1, rng);
    ValueTables v = policy_eval(g1, mu, nu);
    for (int s = 0; s < 3; ++s) {
      double expect = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 3; ++b)
          expect += mu.at(1, s, a) * nu.at(1, s, b) * g1.r2(1, s, a, b);
      CHECK(v.v_at(1, s) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("values stay within the horizon range") {
    MarkovGame g = make_random_game(17, 4, 3, {3, 2}, 2, true);
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 5; ++rep) {
      MarkovPolicy mu = random_policy(g, 0, rng);
      MarkovPolicy nu = random_policy(g, 1, rng);
      ValueTables v = policy_eval(g, mu, nu);
      for (int h = 1; h <= 4; ++h)
        for (int s = 0; s < 3; ++s) {
          CHECK(v.v_at(h, s) >= -1e-9);
          CHECK(v.v_at(h, s) <= 4 - h + 1 + 1e-9);
        }
    }
  }

  SUBCASE("agrees with a Monte Carlo rollout within three sigma") {
    MarkovGame g = make_random_game(23, 3, 3, {2, 2}, 2, true);
    std::mt19937_64 rng(29);
    MarkovPolicy mu = random_policy(g, 0, rng);
    MarkovPolicy nu = random_policy(g, 1, rng);
    ValueTables v = policy_eval(g, mu, nu);
    auto [mc, sigma] = rollout_value(g, mu, nu, 100000, 31);
    CHECK(std::fabs(v.v_at(1, g.initial_state) - mc) <= 3.0 * sigma);
  }
}

TEST_CASE("best response dominates and sandwiches") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    MarkovGame g = make_random_game(100 + trial, 3, 4, {2, 3}, 2, true);
    NashSolution nash = nash_values(g);
    for (int rep = 0; rep < 5; ++rep) {
      MarkovPolicy mu = random_policy(g, 0, rng);
      MarkovPolicy nu = random_policy(g, 1, rng);
      BestResponse vs_nu = best_response_value(g, nu, 0);
      BestResponse vs_mu = best_response_value(g, mu, 1);
      // V^{mu,dagger} <= V* <= V^{dagger,nu} entrywise.
      for (int h = 1; h <= g.horizon; ++h)
        for (int s = 0; s < g.num_states; ++s) {
          CHECK(vs_mu.values.v_at(h, s) <= nash.values.v_at(h, s) + 1e-9);
          CHECK(nash.values.v_at(h, s) <= vs_nu.values.v_at(h, s) + 1e-9);
        }
    }
    // DP best response beats any fixed responder policy.
    MarkovPolicy nu = random_policy(g, 1, rng);
    BestResponse br = best_response_value(g, nu, 0);
    for (int rep = 0; rep < 100; ++rep) {
      MarkovPolicy mu = random_policy(g, 0, rng);
      ValueTables v = policy_eval(g, mu, nu);
      CHECK(v.v_at(1, g.initial_state) <=
            br.values.v_at(1, g.initial_state) + 1e-9);
    }
    // The greedy policy itself attains the DP value.
    ValueTables attained = policy_eval(g, br.policy, nu);
    CHECK(attained.v_at(1, g.initial_state) ==
          doctest::Approx(br.values.v_at(1, g.initial_state)).epsilon(1e-12));
  }
}

TEST_CASE("matching-action best response on an identity game") {
  // H=1 identity reward; the opponent plays column 1 deterministically.
  MarkovGame g;
  g.horizon = 1;
  g.num_states = 1;
  g.players = 2;
  g.zero_sum = true;
  g.action_counts = {2, 2};
  g.initial_state = 0;
  g.transition.assign(4, 1.0);  // single state, rows are trivially (1)
  g.reward = {1, 0, 0, 1};
  g.validate();
  MarkovPolicy nu = MarkovPolicy::Uniform(g, 1);
  nu.at(1, 0, 0) = 1.0;
  nu.at(1, 0, 1) = 0.0;
  BestResponse br = best_response_value(g, nu, 0);
  CHECK(br.values.v_at(1, 0) == doctest::Approx(1.0));
  CHECK(br.policy.at(1, 0, 0) == 1.0);

  SUBCASE("hand-computed gap for uniform vs column 1") {
    MarkovPolicy mu = MarkovPolicy::Uniform(g, 0);
    CHECK(ne_gap(g, mu, nu) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("identity payoff has value one half") {
    NashSolution nash = nash_values(g);
    CHECK(nash.values.v_at(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("ne_gap is nonnegative and zero at Nash") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    MarkovGame g = make_random_game(200 + trial, 2, 3, {3, 3}, 2, true);
    NashSolution nash = nash_values(g);
    CHECK(std::fabs(ne_gap(g, nash.mu, nash.nu)) <= 1e-9);
    for (int rep = 0; rep < 10; ++rep) {
      MarkovPolicy mu = random_policy(g, 0, rng);
      MarkovPolicy nu = random_policy(g, 1, rng);
      CHECK(ne_gap(g, mu, nu) >= -1e-9);
    }
  }
}

TEST_CASE("layer gaps") {
  auto [game, init] = make_two_layer_example();
  NashSolution nash = nash_values(game);

  // Zero at Nash for every layer; uniform is the layer-2 equilibrium.
  for (int h = 1; h <= 2; ++h)
    CHECK(layer_ne_gap(game, nash.mu, nash.nu, h, nash.values) <= 1e-9);
  MarkovPolicy mu = MarkovPolicy::Uniform(game, 0);
  MarkovPolicy nu = MarkovPolicy::Uniform(game, 1);
  CHECK(layer_ne_gap(game, mu, nu, 2, nash.values) <= 1e-12);

  // Layer 1 lower-bounds the overall gap.
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    MarkovPolicy rmu = random_policy(game, 0, rng);
    MarkovPolicy rnu = random_policy(game, 1, rng);
    CHECK(layer_ne_gap(game, rmu, rnu, 1, nash.values) <=
          ne_gap(game, rmu, rnu) + 1e-9);
  }
}

TEST_CASE("random game construction") {
  MarkovGame a = make_random_game(7, 3, 4, {2, 3}, 2, true);
  MarkovGame b = make_random_game(7, 3, 4, {2, 3}, 2, true);
  CHECK(a.transition == b.transition);
  CHECK(a.reward == b.reward);
  MarkovGame c = make_random_game(8, 3, 4, {2, 3}, 2, true);
  CHECK(a.transition != c.transition);

  for (int h = 1; h <= 3; ++h)
    for (int s = 0; s < 4; ++s)
      for (int j = 0; j < 6; ++j) {
        double sum = 0.0;
        for (int sp = 0; sp < 4; ++sp) sum += a.p(h, s, j, sp);
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
      }
  for (double r : a.reward) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }

  // General-sum games carry one reward tensor per player.
  MarkovGame gs = make_random_game(9, 2, 3, {2, 2, 2}, 3, false);
  CHECK(gs.reward.size() == 3u * 2 * 3 * 8);
}

TEST_CASE("json round trip is bit identical") {
  MarkovGame g = make_random_game(55, 2, 3, {2, 2}, 2, true);
  const std::string text = game_to_json(g);
  MarkovGame back = game_from_json(text);
  CHECK(back.transition == g.transition);
  CHECK(back.reward == g.reward);
  CHECK(game_to_json(back) == text);

  std::mt19937_64 rng(59);
  MarkovPolicy p = random_policy(g, 0, rng);
  const std::string ptext = policy_to_json(p);
  MarkovPolicy pback = policy_from_json(ptext);
  CHECK(pback.dist == p.dist);
  CHECK(policy_to_json(pback) == ptext);
}

TEST_CASE("validation rejects malformed games") {
  MarkovGame g = make_random_game(61, 2, 2, {2, 2}, 2, true);
  SUBCASE("bad row sum") {
    g.transition[0] += 0.5;
    CHECK_THROWS_AS(g.validate(), mg::Error);
  }
  SUBCASE("reward out of range") {
    g.reward[0] = 1.5;
    CHECK_THROWS_AS(g.validate(), mg::Error);
  }
  SUBCASE("zero-sum needs two players") {
    g.players = 3;
    g.action_counts = {2, 2, 2};
    CHECK_THROWS_AS(g.validate(), mg::Error);
  }
}

TEST_SUITE_END();
