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

#include "mg/general_sum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace mg {

namespace {

// Decoded joint-action table: digits[j][i] = player i's action in joint j.
std::vector<std::vector<int>> joint_digits(const MarkovGame& game) {
  const int J = game.num_joint_actions();
  std::vector<std::vector<int>> digits(J, std::vector<int>(game.players));
  for (int j = 0; j < J; ++j) {
    int rem = j;
    for (int i = game.players - 1; i >= 0; --i) {
      digits[j][i] = rem % game.action_counts[i];
      rem /= game.action_counts[i];
    }
  }
  return digits;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Single-simplex OFTRL learner with current-step prediction weight.
struct SpLearner {
  double eta = 0.0;
  std::vector<double> sum;     // (1/w_t) sum_{i<=t} w_i g_i
  std::vector<double> last_g;

  explicit SpLearner(int n, double e) : eta(e), sum(n, 0.0), last_g(n, 0.0) {}

  std::vector<double> step(double w_prev_over_w_curr) const {
    const int n = static_cast<int>(sum.size());
    std::vector<double> z(n);
    double zmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      z[i] = eta * (w_prev_over_w_curr * sum[i] + last_g[i]);
      zmax = std::max(zmax, z[i]);
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      z[i] = std::exp(z[i] - zmax);
      total += z[i];
    }
    for (double& v : z) v /= total;
    return z;
  }

  void observe(double w_prev_over_w_curr, const std::vector<double>& g) {
    for (std::size_t i = 0; i < sum.size(); ++i)
      sum[i] = w_prev_over_w_curr * sum[i] + g[i];
    last_g = g;
  }
};

std::vector<long> checkpoint_list(long T, long every) {
  std::vector<long> cps;
  if (every > 0) {
    for (long t = every; t < T; t += every) cps.push_back(t);
  } else {
    long t = 1;
    while (t < T) {
      cps.push_back(t);
      t = std::max(t + 1, t + t / 2);
    }
  }
  cps.push_back(T);
  return cps;
}

// Best-response and realized-value recursions driven over the policy
// history, advanced one sweep at a time. For each player i:
//   B_h^t(s)  = max_{a_i} sum_j alpha_t^j [(r_i + P_h B_{h+1}^j) pi_{-i}^j](s, a_i)
//   V_h^t(s)  =          sum_j alpha_t^j [(r_i + P_h V_{h+1}^j) pi^j](s)
// with the mixtures over j maintained incrementally.
class CceTracker {
 public:
  CceTracker(const MarkovGame& game, const std::vector<std::vector<int>>& digits)
      : game_(&game), digits_(&digits) {
    const int m = game.players, H = game.horizon, S = game.num_states;
    mix_br_.resize(m);
    br_.resize(m);
    mix_v_.resize(m);
    v_.resize(m);
    for (int i = 0; i < m; ++i) {
      mix_br_[i].assign(static_cast<std::size_t>(H) * S * game.action_counts[i], 0.0);
      br_[i].assign(static_cast<std::size_t>(H + 1) * S, 0.0);
      mix_v_[i].assign(static_cast<std::size_t>(H) * S, 0.0);
      v_[i].assign(static_cast<std::size_t>(H + 1) * S, 0.0);
    }
  }

  // step_policies: callable (i, h, s) -> const double* marginal row.
  template <typename PolicyRow>
  void advance(double alpha, const PolicyRow& step_policies) {
    const MarkovGame& game = *game_;
    const int m = game.players, H = game.horizon, S = game.num_states;
    const int J = game.num_joint_actions();
    for (int h = H; h >= 1; --h) {
      for (int i = 0; i < m; ++i) {
        const int Ai = game.action_counts[i];
        for (int s = 0; s < S; ++s) {
          // One-step backups against the step-t product policy.
          double value_term = 0.0;
          std::vector<double> br_term(Ai, 0.0);
          for (int j = 0; j < J; ++j) {
            double prob_others = 1.0, prob_all = 1.0;
            for (int k = 0; k < m; ++k) {
              const double pk = step_policies(k, h, s)[(*digits_)[j][k]];
              prob_all *= pk;
              if (k != i) prob_others *= pk;
            }
            if (prob_all == 0.0 && prob_others == 0.0) continue;
            double backup_br = game.r(i, h, s, j);
            double backup_v = backup_br;
            for (int sp = 0; sp < S; ++sp) {
              const double pr = game.p(h, s, j, sp);
              if (pr == 0.0) continue;
              backup_br += pr * br_[i][static_cast<std::size_t>(h) * S + sp];
              backup_v += pr * v_[i][static_cast<std::size_t>(h) * S + sp];
            }
            br_term[(*digits_)[j][i]] += prob_others * backup_br;
            value_term += prob_all * backup_v;
          }
          for (int a = 0; a < Ai; ++a) {
            double& cell =
                mix_br_[i][(static_cast<std::size_t>(h - 1) * S + s) * Ai + a];
            cell = (1.0 - alpha) * cell + alpha * br_term[a];
          }
          double& vmix = mix_v_[i][static_cast<std::size_t>(h - 1) * S + s];
          vmix = (1.0 - alpha) * vmix + alpha * value_term;
        }
      }
      // Publish layer h before moving to h-1.
      for (int i = 0; i < m; ++i) {
        const int Ai = game.action_counts[i];
        for (int s = 0; s < S; ++s) {
          double best = -std::numeric_limits<double>::infinity();
          for (int a = 0; a < Ai; ++a)
            best = std::max(
                best, mix_br_[i][(static_cast<std::size_t>(h - 1) * S + s) * Ai + a]);
          br_[i][static_cast<std::size_t>(h - 1) * S + s] = best;
          v_[i][static_cast<std::size_t>(h - 1) * S + s] =
              mix_v_[i][static_cast<std::size_t>(h - 1) * S + s];
        }
      }
    }
  }

  double gap_at_root() const {
    double worst = 0.0;
    for (int i = 0; i < game_->players; ++i)
      worst = std::max(worst, br_[i][game_->initial_state] -
                                  v_[i][game_->initial_state]);
    return worst;
  }

  double value_at_root(int player) const { return v_[player][game_->initial_state]; }

 private:
  const MarkovGame* game_;
  const std::vector<std::vector<int>>* digits_;
  // br_/v_ are laid out [h-1][s] with a zero row appended for layer H+1.
  std::vector<std::vector<double>> mix_br_, br_, mix_v_, v_;
};

}  // namespace

std::size_t CertifiedPolicy::offset(int player, int h, int s) const {
  std::size_t off = 0;
  for (int i = 0; i < player; ++i)
    off += static_cast<std::size_t>(horizon) * num_states * action_counts[i];
  return off + (static_cast<std::size_t>(h - 1) * num_states + s) *
                   action_counts[player];
}

GsRunResult run_general_sum_oftrl(const MarkovGame& game, const GsRunConfig& config) {
  if (game.players < 2) throw Error("general-sum driver needs at least two players");
  if (game.zero_sum)
    throw Error("general-sum driver needs per-player rewards (zero_sum = false)");
  const int m = game.players, H = game.horizon, S = game.num_states;
  const int J = game.num_joint_actions();
  const long T = config.iterations;
  if (T < 1) throw Error("iterations must be >= 1");
  const Schedule schedule = Schedule::Alpha(H);
  const double eta = resolve_eta(config.eta, T, game);
  const auto digits = joint_digits(game);

  Stopwatch clock;
  GsRunResult out;
  out.policy.horizon = H;
  out.policy.num_states = S;
  out.policy.players = m;
  out.policy.action_counts = game.action_counts;
  out.policy.iterations = T;
  out.policy.schedule = schedule;
  out.policy.steps.reserve(T);

  std::size_t step_size = 0;
  for (int i = 0; i < m; ++i)
    step_size += static_cast<std::size_t>(H) * S * game.action_counts[i];

  // Q_i tables [i][h] -> [s][joint], learners and regret sums per (i,h,s).
  std::vector<std::vector<std::vector<double>>> q(m);
  std::vector<std::vector<SpLearner>> learners(m);
  std::vector<std::vector<double>> reg_mix(m);   // beta-weighted loss sums
  std::vector<std::vector<double>> reg_pay(m);   // beta-weighted realized payoffs
  std::vector<std::vector<double>> v_tab(m);     // V_{i,h}^t(s), [h-1][s]
  for (int i = 0; i < m; ++i) {
    q[i].assign(H + 1, {});
    for (int h = 1; h <= H; ++h)
      q[i][h].assign(static_cast<std::size_t>(S) * J, static_cast<double>(H - h + 1));
    learners[i].reserve(static_cast<std::size_t>(H) * S);
    for (int h = 1; h <= H; ++h)
      for (int s = 0; s < S; ++s)
        learners[i].emplace_back(game.action_counts[i], eta);
    reg_mix[i].assign(static_cast<std::size_t>(H) * S * game.action_counts[i], 0.0);
    reg_pay[i].assign(static_cast<std::size_t>(H) * S, 0.0);
    v_tab[i].assign(static_cast<std::size_t>(H) * S, 0.0);
  }

  CceTracker tracker(game, digits);
  const std::vector<long> checkpoints = checkpoint_list(T, config.every);
  std::size_t next_cp = 0;

  std::vector<std::vector<double>> v_next(m, std::vector<double>(S, 0.0));
  std::vector<std::vector<double>> v_curr(m, std::vector<double>(S, 0.0));

  for (long t = 1; t <= T; ++t) {
    const double alpha = schedule.beta(t);
    const double rho = 1.0 / schedule.w_ratio(t);  // w_{t-1} / w_t
    std::vector<double> step(step_size);
    auto row_of = [&](int i, int h, int s) -> double* {
      return &step[out.policy.offset(i, h, s)];
    };

    for (int i = 0; i < m; ++i) std::fill(v_next[i].begin(), v_next[i].end(), 0.0);
    for (int h = H; h >= 1; --h) {
      for (int i = 0; i < m; ++i)
        for (int s = 0; s < S; ++s) {
          std::vector<double> pi =
              learners[i][static_cast<std::size_t>(h - 1) * S + s].step(rho);
          std::copy(pi.begin(), pi.end(), row_of(i, h, s));
        }
      for (int s = 0; s < S; ++s) {
        for (int i = 0; i < m; ++i) {
          const int Ai = game.action_counts[i];
          // Value update then marginal losses for this layer.
          std::vector<double> g(Ai, 0.0);
          double full = 0.0;
          for (int j = 0; j < J; ++j) {
            double pv = 0.0;
            if (h < H)
              for (int sp = 0; sp < S; ++sp) pv += game.p(h, s, j, sp) * v_next[i][sp];
            double& cell = q[i][h][static_cast<std::size_t>(s) * J + j];
            cell = (1.0 - alpha) * cell + alpha * (game.r(i, h, s, j) + pv);
            double prob_others = 1.0;
            for (int k = 0; k < m; ++k)
              if (k != i) prob_others *= row_of(k, h, s)[digits[j][k]];
            g[digits[j][i]] += prob_others * cell;
          }
          const double* pi = row_of(i, h, s);
          for (int a = 0; a < Ai; ++a) full += pi[a] * g[a];
          v_curr[i][s] = full;
          v_tab[i][static_cast<std::size_t>(h - 1) * S + s] =
              (1.0 - alpha) * v_tab[i][static_cast<std::size_t>(h - 1) * S + s] +
              alpha * full;
          learners[i][static_cast<std::size_t>(h - 1) * S + s].observe(rho, g);
          for (int a = 0; a < Ai; ++a) {
            double& cell = reg_mix[i][(static_cast<std::size_t>(h - 1) * S + s) * Ai + a];
            cell = (1.0 - alpha) * cell + alpha * g[a];
          }
          double& pay = reg_pay[i][static_cast<std::size_t>(h - 1) * S + s];
          pay = (1.0 - alpha) * pay + alpha * full;
        }
      }
      for (int i = 0; i < m; ++i) std::swap(v_next[i], v_curr[i]);
    }

    // Iterate stability across consecutive steps.
    if (t >= 2) {
      const std::vector<double>& prev = out.policy.steps.back();
      for (int i = 0; i < m; ++i)
        for (int h = 1; h <= H; ++h)
          for (int s = 0; s < S; ++s) {
            const std::size_t off = out.policy.offset(i, h, s);
            double l1 = 0.0;
            for (int a = 0; a < game.action_counts[i]; ++a)
              l1 += std::fabs(step[off + a] - prev[off + a]);
            out.max_step_l1 = std::max(out.max_step_l1, l1);
          }
    }
    out.policy.steps.push_back(std::move(step));

    tracker.advance(alpha, [&](int i, int h, int s) {
      return out.policy.row(t, i, h, s);
    });

    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      ++next_cp;
      GsTraceRecord rec;
      rec.t = t;
      rec.ccegap = tracker.gap_at_root();
      double worst_reg = 0.0;
      for (int i = 0; i < m; ++i)
        for (int h = 1; h <= H; ++h)
          for (int s = 0; s < S; ++s) {
            const int Ai = game.action_counts[i];
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < Ai; ++a)
              best = std::max(
                  best, reg_mix[i][(static_cast<std::size_t>(h - 1) * S + s) * Ai + a]);
            worst_reg = std::max(
                best - reg_pay[i][static_cast<std::size_t>(h - 1) * S + s], worst_reg);
          }
      rec.max_reg = worst_reg;
      rec.elapsed_s = clock.seconds();
      out.trace.push_back(rec);

      // Q = r + P V identity and the V range at the checkpoint.
      for (int i = 0; i < m; ++i)
        for (int h = 1; h <= H; ++h)
          for (int s = 0; s < S; ++s) {
            const double v = v_tab[i][static_cast<std::size_t>(h - 1) * S + s];
            out.max_qv_violation =
                std::max(out.max_qv_violation,
                         std::max(-v, v - static_cast<double>(H - h + 1)));
            for (int j = 0; j < J; ++j) {
              double pv = 0.0;
              if (h < H)
                for (int sp = 0; sp < S; ++sp)
                  pv += game.p(h, s, j, sp) * v_tab[i][static_cast<std::size_t>(h) * S + sp];
              const double expected = game.r(i, h, s, j) + pv;
              out.max_qv_violation = std::max(
                  out.max_qv_violation,
                  std::fabs(q[i][h][static_cast<std::size_t>(s) * J + j] - expected));
            }
          }
    }
  }

  out.final_ccegap = out.trace.back().ccegap;
  out.root_values.resize(m);
  for (int i = 0; i < m; ++i) out.root_values[i] = tracker.value_at_root(i);
  return out;
}

double cce_gap(const MarkovGame& game, const CertifiedPolicy& policy) {
  if (policy.iterations < 1) throw Error("cce_gap needs a non-empty history");
  if (game.zero_sum)
    throw Error("cce_gap needs per-player rewards (zero_sum = false)");
  const Schedule& schedule = policy.schedule;
  const auto digits = joint_digits(game);
  CceTracker tracker(game, digits);
  for (long t = 1; t <= policy.iterations; ++t)
    tracker.advance(schedule.beta(t), [&](int i, int h, int s) {
      return policy.row(t, i, h, s);
    });
  return tracker.gap_at_root();
}

Episode sample_certified_rollout(const CertifiedPolicy& policy,
                                 const MarkovGame& game, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Schedule& schedule = policy.schedule;

  Episode ep;
  int state = game.initial_state;
  long index = policy.iterations;
  for (int h = 1; h <= game.horizon; ++h) {
    // Draw a history index j <= index with probability alpha_index^j,
    // walking from the most recent step downwards.
    long j = index;
    if (index > 1) {
      double u = unif(rng);
      double p = schedule.beta(index);  // alpha_index^index
      j = index;
      while (j > 1) {
        u -= p;
        if (u <= 0.0) break;
        p *= (1.0 - schedule.beta(j)) * schedule.beta(j - 1) / schedule.beta(j);
        --j;
      }
    }
    std::vector<int> actions(game.players);
    for (int i = 0; i < game.players; ++i) {
      const double* row = policy.row(j, i, h, state);
      double u = unif(rng);
      int a = 0;
      for (; a < game.action_counts[i] - 1; ++a) {
        u -= row[a];
        if (u <= 0.0) break;
      }
      actions[i] = a;
    }
    const int joint = game.joint_index(actions);
    std::vector<double> rewards(game.players);
    for (int i = 0; i < game.players; ++i)
      rewards[i] = game.zero_sum
                       ? (i == 0 ? game.r(0, h, state, joint) : -game.r(0, h, state, joint))
                       : game.r(i, h, state, joint);
    ep.states.push_back(state);
    ep.actions.push_back(actions);
    ep.rewards.push_back(rewards);
    // Transition.
    double u = unif(rng);
    int next = game.num_states - 1;
    for (int sp = 0; sp < game.num_states; ++sp) {
      u -= game.p(h, state, joint, sp);
      if (u <= 0.0) {
        next = sp;
        break;
      }
    }
    state = next;
    index = j;
  }
  return ep;
}

std::vector<double> gs_best_response_root(const MarkovGame& game,
                                          const std::vector<MarkovPolicy>& others,
                                          int player) {
  const int m = game.players, H = game.horizon, S = game.num_states;
  const int J = game.num_joint_actions();
  const int Ai = game.action_counts[player];
  const auto digits = joint_digits(game);
  std::vector<double> v_next(S, 0.0), v_curr(S, 0.0);
  for (int h = H; h >= 1; --h) {
    for (int s = 0; s < S; ++s) {
      std::vector<double> by_action(Ai, 0.0);
      for (int j = 0; j < J; ++j) {
        double prob_others = 1.0;
        int slot = 0;
        for (int k = 0; k < m; ++k) {
          if (k == player) continue;
          prob_others *= others[slot].at(h, s, digits[j][k]);
          ++slot;
        }
        double backup = game.zero_sum
                            ? (player == 0 ? game.r(0, h, s, j) : -game.r(0, h, s, j))
                            : game.r(player, h, s, j);
        for (int sp = 0; sp < S; ++sp) backup += game.p(h, s, j, sp) * v_next[sp];
        by_action[digits[j][player]] += prob_others * backup;
      }
      v_curr[s] = *std::max_element(by_action.begin(), by_action.end());
    }
    std::swap(v_next, v_curr);
  }
  return v_next;
}

std::vector<std::vector<double>> gs_policy_values(
    const MarkovGame& game, const std::vector<MarkovPolicy>& policy) {
  const int m = game.players, H = game.horizon, S = game.num_states;
  const int J = game.num_joint_actions();
  const auto digits = joint_digits(game);
  std::vector<std::vector<double>> v(m, std::vector<double>(S, 0.0));
  std::vector<double> next(S);
  for (int i = 0; i < m; ++i) {
    std::fill(v[i].begin(), v[i].end(), 0.0);
    for (int h = H; h >= 1; --h) {
      for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int j = 0; j < J; ++j) {
          double prob = 1.0;
          for (int k = 0; k < m; ++k) prob *= policy[k].at(h, s, digits[j][k]);
          if (prob == 0.0) continue;
          double backup = game.zero_sum && i == 1 ? -game.r(0, h, s, j)
                                                  : game.r(i, h, s, j);
          for (int sp = 0; sp < S; ++sp) backup += game.p(h, s, j, sp) * v[i][sp];
          total += prob * backup;
        }
        next[s] = total;
      }
      v[i] = next;
    }
  }
  return v;
}

void save_certified_policy(const CertifiedPolicy& policy, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  for (long t = 1; t <= policy.iterations; ++t)
    for (int h = 1; h <= policy.horizon; ++h) {
      nlohmann::json rec;
      rec["t"] = t;
      rec["h"] = h;
      nlohmann::json players = nlohmann::json::array();
      for (int i = 0; i < policy.players; ++i) {
        nlohmann::json states = nlohmann::json::array();
        for (int s = 0; s < policy.num_states; ++s) {
          nlohmann::json row = nlohmann::json::array();
          const double* r = policy.row(t, i, h, s);
          for (int a = 0; a < policy.action_counts[i]; ++a) row.push_back(r[a]);
          states.push_back(std::move(row));
        }
        players.push_back(std::move(states));
      }
      rec["pi"] = std::move(players);
      f << rec.dump() << "\n";
    }
  if (!f) throw Error("write failed for " + path);
}

CertifiedPolicy load_certified_policy(const std::string& path,
                                      const MarkovGame& game) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  CertifiedPolicy policy;
  policy.horizon = game.horizon;
  policy.num_states = game.num_states;
  policy.players = game.players;
  policy.action_counts = game.action_counts;
  policy.schedule = Schedule::Alpha(game.horizon);
  std::size_t step_size = 0;
  for (int i = 0; i < game.players; ++i)
    step_size += static_cast<std::size_t>(game.horizon) * game.num_states *
                 game.action_counts[i];
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    const long t = rec.at("t").get<long>();
    const int h = rec.at("h").get<int>();
    while (static_cast<long>(policy.steps.size()) < t)
      policy.steps.emplace_back(step_size, 0.0);
    const nlohmann::json& players = rec.at("pi");
    for (int i = 0; i < game.players; ++i)
      for (int s = 0; s < game.num_states; ++s) {
        const std::size_t off = policy.offset(i, h, s);
        for (int a = 0; a < game.action_counts[i]; ++a)
          policy.steps[t - 1][off + a] = players[i][s][a].get<double>();
      }
  }
  policy.iterations = static_cast<long>(policy.steps.size());
  if (policy.iterations == 0) throw Error("empty certified policy file: " + path);
  return policy;
}

std::string gs_trace_to_csv(const std::vector<GsTraceRecord>& trace) {
  std::string out = "t,ccegap,max_reg,elapsed_s\n";
  for (const GsTraceRecord& rec : trace)
    out += std::to_string(rec.t) + "," + format_double(rec.ccegap) + "," +
           format_double(rec.max_reg) + "," + format_double(rec.elapsed_s) + "\n";
  return out;
}

void write_gs_trace_csv(const std::vector<GsTraceRecord>& trace,
                        const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << gs_trace_to_csv(trace);
  if (!f) throw Error("write failed for " + path);
}

}  // namespace mg
