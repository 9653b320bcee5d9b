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

#ifndef MG_GENERAL_SUM_HPP_
#define MG_GENERAL_SUM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mg/framework.hpp"
#include "mg/game.hpp"

namespace mg {

// Mixture policy produced by the general-sum driver: the full history of
// per-step product policies plus the mixing schedule. Sampling re-draws a
// history index at each step with the schedule's averaging weights.
struct CertifiedPolicy {
  int horizon = 0;
  int num_states = 0;
  int players = 0;
  std::vector<int> action_counts;
  long iterations = 0;
  Schedule schedule = Schedule::Eager();
  // steps[t-1] holds all players' marginals at step t, laid out
  // [i][h-1][s][a] with ragged action counts flattened per player.
  std::vector<std::vector<double>> steps;

  std::size_t offset(int player, int h, int s) const;
  const double* row(long t, int player, int h, int s) const {
    return &steps[t - 1][offset(player, h, s)];
  }
};

struct GsTraceRecord {
  long t = 0;
  double ccegap = 0.0;
  double max_reg = 0.0;
  double elapsed_s = 0.0;
};

struct GsRunResult {
  CertifiedPolicy policy;
  std::vector<GsTraceRecord> trace;
  double final_ccegap = 0.0;
  // Realized values V_{i,1}(s_1) of the certified policy per player.
  std::vector<double> root_values;
  // Diagnostics maxima over the run, sampled at checkpoints:
  // |Q - (r + P V)| plus any excursion of V outside [0, H-h+1].
  double max_qv_violation = 0.0;
  double max_step_l1 = 0.0;  // max_i ||pi_i^t - pi_i^{t-1}||_1, t >= 2
};

struct GsRunConfig {
  EtaSpec eta;
  long iterations = 1;
  long every = 0;
  std::uint64_t seed = 0;
};

// OFTRL for m-player general-sum games with smooth value updates; outputs
// the certified mixture policy over the whole iterate history.
GsRunResult run_general_sum_oftrl(const MarkovGame& game, const GsRunConfig& config);

// Best-response-vs-realized value gap of the certified policy, computed by
// replaying the stored history through the two value recursions.
double cce_gap(const MarkovGame& game, const CertifiedPolicy& policy);

struct Episode {
  std::vector<int> states;                 // visited state per step
  std::vector<std::vector<int>> actions;   // [h][player]
  std::vector<std::vector<double>> rewards;  // [h][player]
};

Episode sample_certified_rollout(const CertifiedPolicy& policy,
                                 const MarkovGame& game, std::uint64_t seed);

// Per-player dynamic-programming best response against the fixed product
// policy of the other players. Returns V_i(s) at step 1 for every state.
std::vector<double> gs_best_response_root(const MarkovGame& game,
                                          const std::vector<MarkovPolicy>& others,
                                          int player);

// Exact per-player values of a Markov product policy.
std::vector<std::vector<double>> gs_policy_values(
    const MarkovGame& game, const std::vector<MarkovPolicy>& policy);

// JSON-lines export, one record per (t, h): {"t", "h", "pi": [player][s][a]}.
void save_certified_policy(const CertifiedPolicy& policy, const std::string& path);
CertifiedPolicy load_certified_policy(const std::string& path, const MarkovGame& game);

// CCE trace CSV: t,ccegap,max_reg,elapsed_s.
std::string gs_trace_to_csv(const std::vector<GsTraceRecord>& trace);
void write_gs_trace_csv(const std::vector<GsTraceRecord>& trace, const std::string& path);

}  // namespace mg

#endif  // MG_GENERAL_SUM_HPP_
