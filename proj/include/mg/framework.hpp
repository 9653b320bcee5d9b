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

#ifndef MG_FRAMEWORK_HPP_
#define MG_FRAMEWORK_HPP_

#include <optional>
#include <string>
#include <vector>

#include "mg/game.hpp"
#include "mg/learners.hpp"
#include "mg/schedule.hpp"

namespace mg {

enum class AlgKind { kFtrl, kOftrl, kGda, kNashQ, kNashPi, kInpg, kModOftrl };

std::string alg_name(AlgKind kind);
AlgKind alg_from_name(const std::string& name);

// Learning-rate expression: a constant, c * T^p, or a named preset that
// encodes one of the standard tunings.
struct EtaSpec {
  enum class Kind { kConst, kPower, kPreset };
  enum class Preset { kNashV, kGda, kModOftrl, kOftrl56, kGsOftrl };
  Kind kind = Kind::kConst;
  double c = 1.0;
  double p = 0.0;
  Preset preset = Preset::kNashV;

  static EtaSpec Const(double c);
  static EtaSpec Power(double c, double p);
  static EtaSpec FromPreset(Preset preset);
  // Grammar: <float> | <float>*T^<float> | T^<float> | preset keyword
  // ("nashv", "gda", "mod-oftrl", "oftrl56", "gs-oftrl").
  static EtaSpec Parse(const std::string& text);
  std::string str() const;
};

double resolve_eta(const EtaSpec& spec, long iterations, const MarkovGame& game);

struct RunConfig {
  AlgKind alg = AlgKind::kFtrl;
  // Value-update schedule; unset resolves to the kind's canonical choice
  // (Alpha for the smooth kinds). NashPI and INPG always run eager, and
  // FTRL/OFTRL/ModOFTRL always run the Alpha schedule.
  std::optional<Schedule> schedule;
  EtaSpec eta;
  long iterations = 1;
  long every = 0;  // trace cadence; 0 = geometric checkpoints
  std::uint64_t seed = 0;
  bool v_form = false;
  bool kl_base_point = false;
  bool diagnostics = false;
  bool record_iterates = false;
  std::optional<PolicyPair> init;

  // Applies the forced schedules (Eager for NashPI/INPG, Alpha for the
  // others) and validates the combination against the game.
  RunConfig normalized(const MarkovGame& game) const;
};

struct TraceRecord {
  long t = 0;
  double negap = 0.0;
  std::vector<double> layer_gaps;
  std::optional<double> max_reg;
  std::optional<double> max_delta;
  double elapsed_s = 0.0;
};

// Per-iteration snapshots kept only when record_iterates is set.
struct IterateLog {
  // [t-1] -> flattened policy/value copies.
  std::vector<std::vector<double>> mu, nu;  // [h][s][a]
  std::vector<std::vector<double>> q;       // [h][s][a*b+b]
};

struct RunResult {
  MarkovPolicy avg_mu;
  MarkovPolicy avg_nu;
  std::vector<TraceRecord> trace;
  double final_gap = 0.0;
  std::optional<IterateLog> iterates;
  // Diagnostics summaries (diagnostics runs only).
  long recursion_violations = 0;
  double max_sandwich_violation = 0.0;  // mod-OFTRL runs
};

// The unified Q-table driver. Handles FTRL, OFTRL, GDA, NashQ, NashPI and
// INPG kinds.
RunResult run_framework(const MarkovGame& game, const RunConfig& config);

// V-table form of the FTRL and GDA kinds; produces the same policies as
// run_framework up to floating-point noise.
RunResult run_v_form(const MarkovGame& game, const RunConfig& config);

// Two-sided Q-table OFTRL with per-player optimistic value estimates.
RunResult run_mod_oftrl(const MarkovGame& game, const RunConfig& config);

// Dispatches on config.alg and config.v_form.
RunResult run(const MarkovGame& game, const RunConfig& config);

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Least-squares fit of log(gap) against log(T). Gaps must be positive and at
// least three points are required.
RateFit fit_rate(const std::vector<std::pair<long, double>>& points);

// Trace CSV: t,negap,negap_layer_1..H,max_reg,max_delta,elapsed_s.
std::string trace_to_csv(const std::vector<TraceRecord>& trace, int horizon);
void write_trace_csv(const std::vector<TraceRecord>& trace, int horizon,
                     const std::string& path);

// 17-significant-digit decimal used across all text output.
std::string format_double(double value);

}  // namespace mg

#endif  // MG_FRAMEWORK_HPP_
