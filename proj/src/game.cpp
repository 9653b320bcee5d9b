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

#include "mg/game.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mg/learners.hpp"

namespace mg {

namespace {
constexpr double kRowSumTol = 1e-12;

void contract_next(const MarkovGame& game, int h, int s, int joint,
                   const std::vector<double>& v_next, double& out) {
  double acc = 0.0;
  for (int sp = 0; sp < game.num_states; ++sp)
    acc += game.p(h, s, joint, sp) * v_next[sp];
  out = acc;
}
}  // namespace

int MarkovGame::num_joint_actions() const {
  int n = 1;
  for (int a : action_counts) n *= a;
  return n;
}

int MarkovGame::joint_index(const std::vector<int>& actions) const {
  int idx = 0;
  for (int i = 0; i < players; ++i) idx = idx * action_counts[i] + actions[i];
  return idx;
}

void MarkovGame::validate() const {
  if (horizon < 1 || num_states < 1 || players < 2)
    throw Error("game sizes must satisfy H >= 1, S >= 1, m >= 2");
  if (static_cast<int>(action_counts.size()) != players)
    throw Error("action_counts must have one entry per player");
  for (int a : action_counts)
    if (a < 1) throw Error("action counts must be positive");
  if (zero_sum && players != 2) throw Error("zero-sum mode requires two players");
  if (initial_state < 0 || initial_state >= num_states)
    throw Error("initial_state out of range");
  const std::size_t joint = num_joint_actions();
  if (transition.size() != static_cast<std::size_t>(horizon) * num_states * joint * num_states)
    throw Error("transition tensor has wrong size");
  if (reward.size() != static_cast<std::size_t>(num_reward_players()) * horizon * num_states * joint)
    throw Error("reward tensor has wrong size");
  for (int h = 1; h <= horizon; ++h)
    for (int s = 0; s < num_states; ++s)
      for (std::size_t j = 0; j < joint; ++j) {
        double sum = 0.0;
        for (int sp = 0; sp < num_states; ++sp) {
          const double pr = p(h, s, static_cast<int>(j), sp);
          if (pr < 0.0) throw Error("negative transition probability");
          sum += pr;
        }
        if (std::fabs(sum - 1.0) > kRowSumTol)
          throw Error("transition row does not sum to 1");
      }
  for (double x : reward)
    if (!(x >= 0.0 && x <= 1.0)) throw Error("rewards must lie in [0,1]");
}

MarkovPolicy MarkovPolicy::Uniform(const MarkovGame& game, int player) {
  MarkovPolicy p;
  p.player = player;
  p.horizon = game.horizon;
  p.num_states = game.num_states;
  p.num_actions = game.action_counts[player];
  p.dist.assign(static_cast<std::size_t>(p.horizon) * p.num_states * p.num_actions,
                1.0 / p.num_actions);
  return p;
}

void MarkovPolicy::validate() const {
  if (dist.size() != static_cast<std::size_t>(horizon) * num_states * num_actions)
    throw Error("policy tensor has wrong size");
  for (int h = 1; h <= horizon; ++h)
    for (int s = 0; s < num_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < num_actions; ++a) {
        const double pr = at(h, s, a);
        if (pr < 0.0) throw Error("negative policy probability");
        sum += pr;
      }
      if (std::fabs(sum - 1.0) > 1e-9) throw Error("policy row does not sum to 1");
    }
}

ValueTables ValueTables::Zero(const MarkovGame& game) {
  ValueTables t;
  t.horizon = game.horizon;
  t.num_states = game.num_states;
  t.a_count = game.a_count();
  t.b_count = game.b_count();
  t.q.assign(static_cast<std::size_t>(t.horizon) * t.num_states * t.a_count * t.b_count, 0.0);
  t.v.assign(static_cast<std::size_t>(t.horizon) * t.num_states, 0.0);
  return t;
}

std::pair<std::vector<double>, std::vector<double>> bellman_backup(
    const MarkovGame& game, int h, const std::vector<double>& v_next,
    const std::vector<double>& mu, const std::vector<double>& nu) {
  const int S = game.num_states, A = game.a_count(), B = game.b_count();
  if (static_cast<int>(v_next.size()) != S) throw Error("bellman_backup: V_next shape mismatch");
  if (static_cast<int>(mu.size()) != S * A || static_cast<int>(nu.size()) != S * B)
    throw Error("bellman_backup: policy shape mismatch");
  std::vector<double> q(static_cast<std::size_t>(S) * A * B);
  std::vector<double> v(S, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < B; ++b) {
        double pv;
        contract_next(game, h, s, a * B + b, v_next, pv);
        q[(static_cast<std::size_t>(s) * A + a) * B + b] = game.r2(h, s, a, b) + pv;
      }
    double val = 0.0;
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < B; ++b)
        val += mu[s * A + a] * nu[s * B + b] * q[(static_cast<std::size_t>(s) * A + a) * B + b];
    v[s] = val;
  }
  return {std::move(q), std::move(v)};
}

namespace {
void check_policy_shape(const MarkovGame& game, const MarkovPolicy& policy,
                        int player) {
  if (policy.horizon != game.horizon || policy.num_states != game.num_states ||
      policy.num_actions != game.action_counts[player])
    throw Error("policy shape does not match the game");
}
}  // namespace

ValueTables policy_eval(const MarkovGame& game, const MarkovPolicy& mu,
                        const MarkovPolicy& nu) {
  if (!game.zero_sum) throw Error("policy_eval requires a zero-sum game");
  check_policy_shape(game, mu, 0);
  check_policy_shape(game, nu, 1);
  ValueTables t = ValueTables::Zero(game);
  const int S = game.num_states;
  std::vector<double> v_next(S, 0.0);
  for (int h = game.horizon; h >= 1; --h) {
    std::vector<double> mu_h(mu.row(h, 0), mu.row(h, 0) + static_cast<std::size_t>(S) * game.a_count());
    std::vector<double> nu_h(nu.row(h, 0), nu.row(h, 0) + static_cast<std::size_t>(S) * game.b_count());
    auto [q, v] = bellman_backup(game, h, v_next, mu_h, nu_h);
    std::copy(q.begin(), q.end(), t.q.begin() + (static_cast<std::size_t>(h - 1) * S * game.a_count() * game.b_count()));
    std::copy(v.begin(), v.end(), t.v.begin() + (static_cast<std::size_t>(h - 1) * S));
    v_next = v;
  }
  return t;
}

BestResponse best_response_value(const MarkovGame& game,
                                 const MarkovPolicy& opponent, int responder) {
  if (!game.zero_sum) throw Error("best_response_value requires a zero-sum game");
  if (responder != 0 && responder != 1) throw Error("responder must be 0 or 1");
  check_policy_shape(game, opponent, 1 - responder);
  const int S = game.num_states, A = game.a_count(), B = game.b_count();
  const int own_actions = responder == 0 ? A : B;

  BestResponse br;
  br.values = ValueTables::Zero(game);
  br.policy.player = responder;
  br.policy.horizon = game.horizon;
  br.policy.num_states = S;
  br.policy.num_actions = own_actions;
  br.policy.dist.assign(static_cast<std::size_t>(game.horizon) * S * own_actions, 0.0);

  std::vector<double> v_next(S, 0.0);
  for (int h = game.horizon; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      // Q(s,a,b) = r + P V_next, shared by both responder sides.
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) {
          double pv;
          contract_next(game, h, s, a * B + b, v_next, pv);
          br.values.q_at(h, s, a, b) = game.r2(h, s, a, b) + pv;
        }
      int best = 0;
      double best_val = 0.0;
      for (int own = 0; own < own_actions; ++own) {
        double val = 0.0;
        if (responder == 0) {
          for (int b = 0; b < B; ++b)
            val += opponent.at(h, s, b) * br.values.q_at(h, s, own, b);
        } else {
          for (int a = 0; a < A; ++a)
            val += opponent.at(h, s, a) * br.values.q_at(h, s, a, own);
        }
        // Strict comparison keeps the lowest action index on ties.
        const bool better = responder == 0 ? val > best_val : val < best_val;
        if (own == 0 || better) {
          best_val = val;
          best = own;
        }
      }
      br.values.v_at(h, s) = best_val;
      br.policy.at(h, s, best) = 1.0;
    }
    for (int s = 0; s < S; ++s) v_next[s] = br.values.v_at(h, s);
  }
  return br;
}

NashSolution nash_values(const MarkovGame& game) {
  if (!game.zero_sum) throw Error("nash_values requires a zero-sum game");
  const int S = game.num_states, A = game.a_count(), B = game.b_count();
  NashSolution out;
  out.values = ValueTables::Zero(game);
  out.mu = MarkovPolicy::Uniform(game, 0);
  out.nu = MarkovPolicy::Uniform(game, 1);
  std::vector<double> v_next(S, 0.0);
  std::vector<double> m(static_cast<std::size_t>(A) * B);
  for (int h = game.horizon; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) {
          double pv;
          contract_next(game, h, s, a * B + b, v_next, pv);
          const double qv = game.r2(h, s, a, b) + pv;
          out.values.q_at(h, s, a, b) = qv;
          m[static_cast<std::size_t>(a) * B + b] = qv;
        }
      MatrixNeSolution ne = matrix_ne(m, A, B);
      out.values.v_at(h, s) = ne.value;
      for (int a = 0; a < A; ++a) out.mu.at(h, s, a) = ne.row[a];
      for (int b = 0; b < B; ++b) out.nu.at(h, s, b) = ne.col[b];
    }
    for (int s = 0; s < S; ++s) v_next[s] = out.values.v_at(h, s);
  }
  return out;
}

double ne_gap(const MarkovGame& game, const MarkovPolicy& mu,
              const MarkovPolicy& nu) {
  const BestResponse vs_nu = best_response_value(game, nu, 0);
  const BestResponse vs_mu = best_response_value(game, mu, 1);
  return vs_nu.values.v_at(1, game.initial_state) -
         vs_mu.values.v_at(1, game.initial_state);
}

double layer_ne_gap(const MarkovGame& game, const MarkovPolicy& mu,
                    const MarkovPolicy& nu, int h, const ValueTables& qstar) {
  const int S = game.num_states, A = game.a_count(), B = game.b_count();
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    double best_row = -1e300, best_col = 1e300;
    for (int a = 0; a < A; ++a) {
      double val = 0.0;
      for (int b = 0; b < B; ++b) val += qstar.q_at(h, s, a, b) * nu.at(h, s, b);
      best_row = std::max(best_row, val);
    }
    for (int b = 0; b < B; ++b) {
      double val = 0.0;
      for (int a = 0; a < A; ++a) val += qstar.q_at(h, s, a, b) * mu.at(h, s, a);
      best_col = std::min(best_col, val);
    }
    worst = std::max(worst, best_row - best_col);
  }
  return worst;
}

std::pair<MarkovGame, PolicyPair> make_two_layer_example() {
  MarkovGame game;
  game.horizon = 2;
  game.num_states = 5;  // 0 = root, 1..4 = second-layer states (a,b) row-major
  game.players = 2;
  game.zero_sum = true;
  game.action_counts = {2, 2};
  game.initial_state = 0;
  const int S = 5, J = 4;
  game.transition.assign(static_cast<std::size_t>(2) * S * J * S, 0.0);
  game.reward.assign(static_cast<std::size_t>(2) * S * J, 0.0);
  auto set_p = [&](int h, int s, int joint, int next, double pr) {
    game.transition[((static_cast<std::size_t>(h - 1) * S + s) * J + joint) * S + next] = pr;
  };
  // h=1: root fans out to s_{ab}; the layer-2 states self-loop (unreachable).
  for (int j = 0; j < J; ++j) set_p(1, 0, j, 1 + j, 1.0);
  for (int s = 1; s < S; ++s)
    for (int j = 0; j < J; ++j) set_p(1, s, j, s, 1.0);
  // h=2: terminal step, send everything back to the root.
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < J; ++j) set_p(2, s, j, 0, 1.0);
  // Rewards depend on actions only: 0.1*I at h=1, I at h=2.
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        game.reward[((0 * 2 + 0) * S + s) * J + a * 2 + b] = a == b ? 0.1 : 0.0;
        game.reward[((0 * 2 + 1) * S + s) * J + a * 2 + b] = a == b ? 1.0 : 0.0;
      }
  game.validate();

  PolicyPair init;
  init.mu = MarkovPolicy::Uniform(game, 0);
  init.nu = MarkovPolicy::Uniform(game, 1);
  auto set_mu = [&](int h, int s, double p1) {
    init.mu.at(h, s, 0) = p1;
    init.mu.at(h, s, 1) = 1.0 - p1;
  };
  auto set_nu = [&](int h, int s, double p1) {
    init.nu.at(h, s, 0) = p1;
    init.nu.at(h, s, 1) = 1.0 - p1;
  };
  set_mu(1, 0, 0.3);
  set_nu(1, 0, 0.7);
  set_mu(2, 1, 0.248);
  set_nu(2, 1, 0.248);
  set_mu(2, 2, 0.500);
  set_nu(2, 2, 0.168);
  set_mu(2, 3, 0.500);
  set_nu(2, 3, 0.168);
  set_mu(2, 4, 0.752);
  set_nu(2, 4, 0.248);
  return {std::move(game), std::move(init)};
}

MarkovGame make_random_game(std::uint64_t seed, int horizon, int num_states,
                            const std::vector<int>& action_counts, int players,
                            bool zero_sum) {
  MarkovGame game;
  game.horizon = horizon;
  game.num_states = num_states;
  game.players = players;
  game.zero_sum = zero_sum;
  game.action_counts = action_counts;
  game.initial_state = 0;
  const std::size_t joint = game.num_joint_actions();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  game.reward.resize(static_cast<std::size_t>(game.num_reward_players()) * horizon *
                     num_states * joint);
  for (double& x : game.reward) x = unif(rng);

  game.transition.resize(static_cast<std::size_t>(horizon) * num_states * joint * num_states);
  std::vector<double> row(num_states);
  std::size_t pos = 0;
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < num_states; ++s)
      for (std::size_t j = 0; j < joint; ++j) {
        // Dirichlet(1) row: normalized unit exponentials.
        double sum = 0.0;
        for (int sp = 0; sp < num_states; ++sp) {
          row[sp] = -std::log(1.0 - unif(rng));
          sum += row[sp];
        }
        double acc = 0.0;
        for (int sp = 0; sp < num_states; ++sp) {
          row[sp] /= sum;
          acc += row[sp];
        }
        // Pin the row sum to exactly one.
        row[num_states - 1] += 1.0 - acc;
        for (int sp = 0; sp < num_states; ++sp) game.transition[pos++] = row[sp];
      }
  game.validate();
  return game;
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {
using nlohmann::json;

json tensor4(const std::vector<double>& data, int d0, int d1, int d2, int d3) {
  json out = json::array();
  std::size_t pos = 0;
  for (int i = 0; i < d0; ++i) {
    json a = json::array();
    for (int j = 0; j < d1; ++j) {
      json b = json::array();
      for (int k = 0; k < d2; ++k) {
        json c = json::array();
        for (int l = 0; l < d3; ++l) c.push_back(data[pos++]);
        b.push_back(std::move(c));
      }
      a.push_back(std::move(b));
    }
    out.push_back(std::move(a));
  }
  return out;
}

void flatten(const json& node, std::vector<double>& out) {
  if (node.is_array()) {
    for (const auto& child : node) flatten(child, out);
  } else {
    out.push_back(node.get<double>());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("write failed for " + path);
}

json policy_json(const MarkovPolicy& p) {
  json j;
  j["player"] = p.player;
  json dist = json::array();
  std::size_t pos = 0;
  for (int h = 0; h < p.horizon; ++h) {
    json hs = json::array();
    for (int s = 0; s < p.num_states; ++s) {
      json row = json::array();
      for (int a = 0; a < p.num_actions; ++a) row.push_back(p.dist[pos++]);
      hs.push_back(std::move(row));
    }
    dist.push_back(std::move(hs));
  }
  j["dist"] = std::move(dist);
  return j;
}

MarkovPolicy policy_from(const json& j) {
  MarkovPolicy p;
  p.player = j.at("player").get<int>();
  const json& dist = j.at("dist");
  p.horizon = static_cast<int>(dist.size());
  if (p.horizon == 0) throw Error("policy dist is empty");
  p.num_states = static_cast<int>(dist[0].size());
  p.num_actions = static_cast<int>(dist[0][0].size());
  flatten(dist, p.dist);
  if (p.dist.size() !=
      static_cast<std::size_t>(p.horizon) * p.num_states * p.num_actions)
    throw Error("ragged policy tensor");
  p.validate();
  return p;
}
}  // namespace

std::string game_to_json(const MarkovGame& game) {
  json j;
  j["horizon"] = game.horizon;
  j["num_states"] = game.num_states;
  j["players"] = game.players;
  j["zero_sum"] = game.zero_sum;
  j["action_counts"] = game.action_counts;
  j["initial_state"] = game.initial_state;
  j["reward"] = tensor4(game.reward, game.num_reward_players(), game.horizon,
                        game.num_states, game.num_joint_actions());
  j["transition"] = tensor4(game.transition, game.horizon, game.num_states,
                            game.num_joint_actions(), game.num_states);
  return j.dump(1);
}

MarkovGame game_from_json(const std::string& text) {
  json j = json::parse(text);
  MarkovGame game;
  game.horizon = j.at("horizon").get<int>();
  game.num_states = j.at("num_states").get<int>();
  game.players = j.at("players").get<int>();
  game.zero_sum = j.at("zero_sum").get<bool>();
  game.action_counts = j.at("action_counts").get<std::vector<int>>();
  game.initial_state = j.at("initial_state").get<int>();
  flatten(j.at("reward"), game.reward);
  flatten(j.at("transition"), game.transition);
  game.validate();
  return game;
}

void save_game(const MarkovGame& game, const std::string& path) {
  write_file(path, game_to_json(game));
}

MarkovGame load_game(const std::string& path) {
  return game_from_json(read_file(path));
}

std::string policy_to_json(const MarkovPolicy& policy) {
  return policy_json(policy).dump(1);
}

MarkovPolicy policy_from_json(const std::string& text) {
  return policy_from(json::parse(text));
}

void save_policy(const MarkovPolicy& policy, const std::string& path) {
  write_file(path, policy_to_json(policy));
}

MarkovPolicy load_policy(const std::string& path) {
  return policy_from_json(read_file(path));
}

void save_policy_pair(const PolicyPair& pair, const std::string& path) {
  json j;
  j["mu"] = policy_json(pair.mu);
  j["nu"] = policy_json(pair.nu);
  write_file(path, j.dump(1));
}

PolicyPair load_policy_pair(const std::string& path) {
  json j = json::parse(read_file(path));
  return PolicyPair{policy_from(j.at("mu")), policy_from(j.at("nu"))};
}

}  // namespace mg
