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

#ifndef MG_LEARNERS_HPP_
#define MG_LEARNERS_HPP_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mg/schedule.hpp"

namespace mg {

// Euclidean projection onto the probability simplex. The output satisfies
// the KKT conditions: out_i = max(v_i - tau, 0) with sum(out) = 1.
std::vector<double> project_simplex(const std::vector<double>& v);

struct MatrixNeSolution {
  std::vector<double> row;  // maximizer mix
  std::vector<double> col;  // minimizer mix
  double value = 0.0;
  double gap = 0.0;  // duality gap certificate
};

// Exact Nash equilibrium of the matrix game M (row player maximizes),
// solved via the minimax linear program with a dense simplex method using
// Bland's rule. Constant matrices return the uniform pair. Throws if the
// verified duality gap exceeds 1e-9.
MatrixNeSolution matrix_ne(const std::vector<double>& m, int rows, int cols);

enum class LearnerKind { kFtrl, kOftrl, kGda, kMatrixNe, kHedge };

// Which w-weight multiplies the one-step loss prediction in OFTRL.
enum class PredictionWeight { kPrevious, kCurrent };

struct LearnerConfig {
  LearnerKind kind = LearnerKind::kFtrl;
  double eta = 0.0;
  PredictionWeight prediction = PredictionWeight::kPrevious;
  // Starting points. For FTRL/OFTRL these act as KL base points multiplying
  // the softmax; empty means uniform.
  std::vector<double> base_mu;
  std::vector<double> base_nu;
};

// One per-state matrix-game learner for both zero-sum players. The driver
// alternates step(t) (produce policies for step t from information through
// t-1) and observe(g_mu, g_nu) (record the step-t payoff vectors
// g_mu = [Q^t nu^t](s,.) and g_nu = [(Q^t)' mu^t](s,.)).
//
// Running sums are kept in normalized form N^t = (1/w_t) sum_{i<=t} w_i g_i,
// so nothing grows with t even for long runs.
class TwoPlayerLearner {
 public:
  TwoPlayerLearner(const LearnerConfig& config, int num_a, int num_b,
                   const Schedule& schedule);

  // q_prev: previous Q matrix (row-major num_a x num_b); consumed by the
  // MatrixNe kind, ignored otherwise.
  std::pair<std::vector<double>, std::vector<double>> step(
      const double* q_prev = nullptr);

  void observe(const std::vector<double>& g_mu, const std::vector<double>& g_nu);

  long steps() const { return t_; }
  const std::vector<double>& last_mu() const { return mu_prev_; }
  const std::vector<double>& last_nu() const { return nu_prev_; }

 private:
  std::vector<double> softmax_policy(const std::vector<double>& exponent,
                                     const std::vector<double>& base) const;

  LearnerConfig config_;
  const Schedule* schedule_;
  int num_a_, num_b_;
  long t_ = 0;  // steps observed
  std::vector<double> sum_mu_, sum_nu_;    // normalized weighted sums
  std::vector<double> cum_mu_, cum_nu_;    // unweighted sums (Hedge)
  std::vector<double> last_g_mu_, last_g_nu_;
  std::vector<double> mu_prev_, nu_prev_;
};

// beta-weighted regret bookkeeping for one (h, s) pair. After observing
// steps 1..t the queries return
//   max-player: max_a sum_i beta_t^i g_mu^i(a) - sum_i beta_t^i <mu^i, g_mu^i>
//   min-player: sum_i beta_t^i <nu^i, g_nu^i> - min_b sum_i beta_t^i g_nu^i(b)
class RegretAccumulator {
 public:
  RegretAccumulator(int num_a, int num_b, const Schedule& schedule,
                    bool keep_history = false, int history_cap = 64);

  void observe(const std::vector<double>& g_mu, const std::vector<double>& g_nu,
               const std::vector<double>& mu, const std::vector<double>& nu);

  double max_player_regret() const;
  double min_player_regret() const;
  long steps() const { return t_; }

  // Brute-force recomputation from the stored history (diagnostics mode).
  double max_player_regret_bruteforce() const;
  double min_player_regret_bruteforce() const;

 private:
  struct Step {
    std::vector<double> g_mu, g_nu, mu, nu;
  };
  const Schedule* schedule_;
  long t_ = 0;
  std::vector<double> loss_mu_, loss_nu_;  // beta-weighted loss sums
  double pay_mu_ = 0.0, pay_nu_ = 0.0;     // beta-weighted realized payoffs
  bool keep_history_;
  int history_cap_;
  std::vector<Step> history_;
};

double weighted_regret(const RegretAccumulator& acc, int player);

}  // namespace mg

#endif  // MG_LEARNERS_HPP_
