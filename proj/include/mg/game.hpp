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

#ifndef MG_GAME_HPP_
#define MG_GAME_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mg/error.hpp"

namespace mg {

// Tabular finite-horizon Markov game. Step indices h run 1..H in the API;
// storage is 0-based. Joint actions are indexed row-major over
// (a_1,...,a_m). In zero-sum mode (requires two players) only player 1's
// reward is stored; player 2's is its negation.
struct MarkovGame {
  int horizon = 0;
  int num_states = 0;
  int players = 2;
  bool zero_sum = true;
  std::vector<int> action_counts;  // one entry per player
  int initial_state = 0;
  // transition[h-1][s][joint][s'], flattened.
  std::vector<double> transition;
  // reward[i][h-1][s][joint], flattened; i ranges over one player when
  // zero_sum, otherwise all players.
  std::vector<double> reward;

  int num_joint_actions() const;
  int num_reward_players() const { return zero_sum ? 1 : players; }
  int joint_index(const std::vector<int>& actions) const;

  double p(int h, int s, int joint, int next) const {
    return transition[((static_cast<std::size_t>(h - 1) * num_states + s) *
                           num_joint_actions() +
                       joint) *
                          num_states +
                      next];
  }
  double r(int player, int h, int s, int joint) const {
    return reward[((static_cast<std::size_t>(player) * horizon + (h - 1)) *
                       num_states +
                   s) *
                      num_joint_actions() +
                  joint];
  }
  // Zero-sum accessors for the two-player (a, b) layout.
  int a_count() const { return action_counts[0]; }
  int b_count() const { return action_counts[1]; }
  double r2(int h, int s, int a, int b) const {
    return r(0, h, s, a * b_count() + b);
  }

  // Throws on malformed tensors, rows not summing to one, rewards
  // outside [0,1].
  void validate() const;
};

// Per-step, per-state action distribution for one player.
struct MarkovPolicy {
  int player = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> dist;  // [h-1][s][a]

  double& at(int h, int s, int a) {
    return dist[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
  }
  double at(int h, int s, int a) const {
    return dist[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions + a];
  }
  const double* row(int h, int s) const {
    return &dist[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions];
  }
  double* row(int h, int s) {
    return &dist[(static_cast<std::size_t>(h - 1) * num_states + s) * num_actions];
  }

  static MarkovPolicy Uniform(const MarkovGame& game, int player);
  void validate() const;
};

// Q[h][s][a][b] and V[h][s] tables for the two-player zero-sum case.
struct ValueTables {
  int horizon = 0;
  int num_states = 0;
  int a_count = 0;
  int b_count = 0;
  std::vector<double> q;  // [h-1][s][a*b_count+b]
  std::vector<double> v;  // [h-1][s]

  static ValueTables Zero(const MarkovGame& game);
  double& q_at(int h, int s, int a, int b) {
    return q[(static_cast<std::size_t>(h - 1) * num_states + s) * a_count * b_count +
             a * b_count + b];
  }
  double q_at(int h, int s, int a, int b) const {
    return q[(static_cast<std::size_t>(h - 1) * num_states + s) * a_count * b_count +
             a * b_count + b];
  }
  const double* q_row(int h, int s) const {
    return &q[(static_cast<std::size_t>(h - 1) * num_states + s) * a_count * b_count];
  }
  double& v_at(int h, int s) {
    return v[static_cast<std::size_t>(h - 1) * num_states + s];
  }
  double v_at(int h, int s) const {
    return v[static_cast<std::size_t>(h - 1) * num_states + s];
  }
};

// One Bellman backup at step h: Q(s,a,b) = r_h + P_h V_next, V = mu' Q nu.
// mu/nu are per-state action distributions at step h. Returns (Q, V) slices
// flattened as [s][a][b] and [s].
std::pair<std::vector<double>, std::vector<double>> bellman_backup(
    const MarkovGame& game, int h, const std::vector<double>& v_next,
    const std::vector<double>& mu, const std::vector<double>& nu);

// Exact Q^{mu,nu}, V^{mu,nu} by backward induction with V_{H+1} = 0.
ValueTables policy_eval(const MarkovGame& game, const MarkovPolicy& mu,
                        const MarkovPolicy& nu);

struct BestResponse {
  ValueTables values;
  MarkovPolicy policy;  // greedy deterministic responder, lowest index on ties
};

// Best response of `responder` (0 = max-player, 1 = min-player) against the
// fixed opponent policy, by dynamic programming. Values are always in terms
// of player 1's reward.
BestResponse best_response_value(const MarkovGame& game,
                                 const MarkovPolicy& opponent, int responder);

struct NashSolution {
  ValueTables values;  // Q*, V*
  MarkovPolicy mu;
  MarkovPolicy nu;
};

// Q*, V* by backward induction solving the matrix game at every (h, s).
NashSolution nash_values(const MarkovGame& game);

// V_1^{dagger,nu}(s_1) - V_1^{mu,dagger}(s_1).
double ne_gap(const MarkovGame& game, const MarkovPolicy& mu,
              const MarkovPolicy& nu);

// max_s [ max_a [Q*_h nu_h](s,a) - min_b [(Q*_h)' mu_h](s,b) ].
double layer_ne_gap(const MarkovGame& game, const MarkovPolicy& mu,
                    const MarkovPolicy& nu, int h, const ValueTables& qstar);

struct PolicyPair {
  MarkovPolicy mu;
  MarkovPolicy nu;
};

// The two-layer benchmark game (H=2, 5 states, 2x2 actions, identity-style
// rewards scaled 0.1 / 1.0) together with its non-uniform initialization.
std::pair<MarkovGame, PolicyPair> make_two_layer_example();

// Random game with uniform [0,1] rewards and Dirichlet(1) transition rows.
// Deterministic for a fixed seed.
MarkovGame make_random_game(std::uint64_t seed, int horizon, int num_states,
                            const std::vector<int>& action_counts, int players,
                            bool zero_sum);

// JSON (de)serialization; round-trips bit-identically.
std::string game_to_json(const MarkovGame& game);
MarkovGame game_from_json(const std::string& text);
void save_game(const MarkovGame& game, const std::string& path);
MarkovGame load_game(const std::string& path);

std::string policy_to_json(const MarkovPolicy& policy);
MarkovPolicy policy_from_json(const std::string& text);
void save_policy(const MarkovPolicy& policy, const std::string& path);
MarkovPolicy load_policy(const std::string& path);

void save_policy_pair(const PolicyPair& pair, const std::string& path);
PolicyPair load_policy_pair(const std::string& path);

}  // namespace mg

#endif  // MG_GAME_HPP_
