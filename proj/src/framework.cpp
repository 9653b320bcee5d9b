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

#include "mg/framework.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace mg {

std::string alg_name(AlgKind kind) {
  switch (kind) {
    case AlgKind::kFtrl: return "ftrl";
    case AlgKind::kOftrl: return "oftrl";
    case AlgKind::kGda: return "gda";
    case AlgKind::kNashQ: return "nash-q";
    case AlgKind::kNashPi: return "nash-pi";
    case AlgKind::kInpg: return "inpg";
    case AlgKind::kModOftrl: return "mod-oftrl";
  }
  return "?";
}

AlgKind alg_from_name(const std::string& name) {
  static const std::map<std::string, AlgKind> table = {
      {"ftrl", AlgKind::kFtrl},       {"oftrl", AlgKind::kOftrl},
      {"gda", AlgKind::kGda},         {"nash-q", AlgKind::kNashQ},
      {"nash-pi", AlgKind::kNashPi},  {"inpg", AlgKind::kInpg},
      {"mod-oftrl", AlgKind::kModOftrl}};
  auto it = table.find(name);
  if (it == table.end()) throw Error("unknown algorithm: " + name);
  return it->second;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

// ---------------------------------------------------------------------------
// Eta expressions

EtaSpec EtaSpec::Const(double c) {
  EtaSpec s;
  s.kind = Kind::kConst;
  s.c = c;
  return s;
}

EtaSpec EtaSpec::Power(double c, double p) {
  EtaSpec s;
  s.kind = Kind::kPower;
  s.c = c;
  s.p = p;
  return s;
}

EtaSpec EtaSpec::FromPreset(Preset preset) {
  EtaSpec s;
  s.kind = Kind::kPreset;
  s.preset = preset;
  return s;
}

EtaSpec EtaSpec::Parse(const std::string& text) {
  static const std::map<std::string, Preset> presets = {
      {"nashv", Preset::kNashV},
      {"gda", Preset::kGda},
      {"mod-oftrl", Preset::kModOftrl},
      {"oftrl56", Preset::kOftrl56},
      {"gs-oftrl", Preset::kGsOftrl}};
  auto it = presets.find(text);
  if (it != presets.end()) return FromPreset(it->second);

  auto parse_float = [](const std::string& s) {
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw Error("cannot parse eta expression: " + s);
    }
    if (used != s.size()) throw Error("cannot parse eta expression: " + s);
    return v;
  };

  const std::string star_t = "*T^";
  auto pos = text.find(star_t);
  if (pos != std::string::npos)
    return Power(parse_float(text.substr(0, pos)),
                 parse_float(text.substr(pos + star_t.size())));
  if (text.rfind("T^", 0) == 0) return Power(1.0, parse_float(text.substr(2)));
  return Const(parse_float(text));
}

std::string EtaSpec::str() const {
  switch (kind) {
    case Kind::kConst:
      return format_double(c);
    case Kind::kPower:
      return format_double(c) + "*T^" + format_double(p);
    case Kind::kPreset:
      switch (preset) {
        case Preset::kNashV: return "nashv";
        case Preset::kGda: return "gda";
        case Preset::kModOftrl: return "mod-oftrl";
        case Preset::kOftrl56: return "oftrl56";
        case Preset::kGsOftrl: return "gs-oftrl";
      }
  }
  return "?";
}

double resolve_eta(const EtaSpec& spec, long iterations, const MarkovGame& game) {
  const double T = static_cast<double>(std::max<long>(iterations, 2));
  const double H = game.horizon;
  switch (spec.kind) {
    case EtaSpec::Kind::kConst:
      return spec.c;
    case EtaSpec::Kind::kPower:
      return spec.c * std::pow(T, spec.p);
    case EtaSpec::Kind::kPreset: {
      const int max_actions =
          *std::max_element(game.action_counts.begin(), game.action_counts.end());
      switch (spec.preset) {
        case EtaSpec::Preset::kNashV:
          return 4.0 / std::sqrt(H * T);
        case EtaSpec::Preset::kGda:
          return 4.0 / std::sqrt(max_actions * H * T);
        case EtaSpec::Preset::kModOftrl:
          return 1.0 / (16.0 * H);
        case EtaSpec::Preset::kOftrl56:
          return std::pow(T, -1.0 / 6.0);
        case EtaSpec::Preset::kGsOftrl:
          return std::pow(std::log(max_actions) * std::log(T) / (H * H * H * T), 0.25) /
                 std::sqrt(std::max(game.players - 1, 1));
      }
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Shared run machinery

namespace {

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

LearnerKind learner_kind(AlgKind alg) {
  switch (alg) {
    case AlgKind::kFtrl: return LearnerKind::kFtrl;
    case AlgKind::kOftrl: return LearnerKind::kOftrl;
    case AlgKind::kModOftrl: return LearnerKind::kOftrl;
    case AlgKind::kGda: return LearnerKind::kGda;
    case AlgKind::kNashQ: return LearnerKind::kMatrixNe;
    case AlgKind::kNashPi: return LearnerKind::kMatrixNe;
    case AlgKind::kInpg: return LearnerKind::kHedge;
  }
  return LearnerKind::kFtrl;
}

// Per-(h,s) learner bank plus the policy buffers the drivers share.
struct LearnerBank {
  std::vector<TwoPlayerLearner> learners;
  std::vector<RegretAccumulator> regrets;
  int num_states = 0;

  TwoPlayerLearner& at(int h, int s) {
    return learners[static_cast<std::size_t>(h - 1) * num_states + s];
  }
  RegretAccumulator& reg(int h, int s) {
    return regrets[static_cast<std::size_t>(h - 1) * num_states + s];
  }
};

LearnerBank make_bank(const MarkovGame& game, const RunConfig& config,
                      double eta, PredictionWeight prediction) {
  const int H = game.horizon, S = game.num_states;
  const int A = game.a_count(), B = game.b_count();
  const LearnerKind kind = learner_kind(config.alg);
  // FTRL/OFTRL honor the init only in KL base-point mode; GDA and Hedge use
  // it as their actual starting iterate whenever given.
  const bool softmax_kind = kind == LearnerKind::kFtrl || kind == LearnerKind::kOftrl;
  const bool use_init =
      config.init.has_value() && (!softmax_kind || config.kl_base_point);

  LearnerBank bank;
  bank.num_states = S;
  bank.learners.reserve(static_cast<std::size_t>(H) * S);
  bank.regrets.reserve(static_cast<std::size_t>(H) * S);
  for (int h = 1; h <= H; ++h)
    for (int s = 0; s < S; ++s) {
      LearnerConfig lc;
      lc.kind = kind;
      lc.eta = eta;
      lc.prediction = prediction;
      if (use_init) {
        lc.base_mu.assign(config.init->mu.row(h, s), config.init->mu.row(h, s) + A);
        lc.base_nu.assign(config.init->nu.row(h, s), config.init->nu.row(h, s) + B);
      }
      bank.learners.emplace_back(lc, A, B, *config.schedule);
      bank.regrets.emplace_back(A, B, *config.schedule, /*keep_history=*/false);
    }
  return bank;
}

void mix_into(MarkovPolicy& avg, const MarkovPolicy& current, double weight) {
  for (std::size_t i = 0; i < avg.dist.size(); ++i)
    avg.dist[i] = (1.0 - weight) * avg.dist[i] + weight * current.dist[i];
}

double bank_max_regret(LearnerBank& bank, int H, int S) {
  double worst = 0.0;
  for (int h = 1; h <= H; ++h)
    for (int s = 0; s < S; ++s) {
      worst = std::max(worst, bank.reg(h, s).max_player_regret());
      worst = std::max(worst, bank.reg(h, s).min_player_regret());
    }
  return worst;
}

TraceRecord make_trace_record(const MarkovGame& game, const NashSolution& nash,
                              const MarkovPolicy& avg_mu, const MarkovPolicy& avg_nu,
                              long t, double elapsed) {
  TraceRecord rec;
  rec.t = t;
  rec.negap = ne_gap(game, avg_mu, avg_nu);
  rec.layer_gaps.resize(game.horizon);
  for (int h = 1; h <= game.horizon; ++h)
    rec.layer_gaps[h - 1] = layer_ne_gap(game, avg_mu, avg_nu, h, nash.values);
  rec.elapsed_s = elapsed;
  return rec;
}

}  // namespace

RunConfig RunConfig::normalized(const MarkovGame& game) const {
  RunConfig c = *this;
  if (c.iterations < 1) throw Error("iterations must be >= 1");
  switch (c.alg) {
    case AlgKind::kNashPi:
    case AlgKind::kInpg:
      c.schedule = Schedule::Eager();
      break;
    case AlgKind::kFtrl:
    case AlgKind::kOftrl:
    case AlgKind::kModOftrl:
      c.schedule = Schedule::Alpha(game.horizon);
      break;
    case AlgKind::kGda:
    case AlgKind::kNashQ:
      if (!c.schedule || c.schedule->kind() == Schedule::Kind::kAlpha)
        c.schedule = Schedule::Alpha(game.horizon);
      break;
  }
  if (c.v_form && c.alg != AlgKind::kFtrl && c.alg != AlgKind::kGda)
    throw Error("the V form supports only the ftrl and gda kinds");
  if (c.init) {
    if (c.init->mu.horizon != game.horizon || c.init->mu.num_states != game.num_states ||
        c.init->mu.num_actions != game.a_count() ||
        c.init->nu.num_actions != game.b_count())
      throw Error("initial policies do not match the game shape");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Q-form driver

RunResult run_framework(const MarkovGame& game, const RunConfig& raw_config) {
  if (!game.zero_sum) throw Error("run_framework requires a zero-sum game");
  const RunConfig config = raw_config.normalized(game);
  const int H = game.horizon, S = game.num_states;
  const int A = game.a_count(), B = game.b_count();
  const long T = config.iterations;
  const double eta = resolve_eta(config.eta, T, game);
  const bool uniform_avg = config.alg == AlgKind::kInpg;

  Stopwatch clock;
  const NashSolution nash = nash_values(game);
  LearnerBank bank = make_bank(game, config, eta, PredictionWeight::kPrevious);

  // Q tables per step, flattened [s][a*B+b].
  const std::size_t slice = static_cast<std::size_t>(S) * A * B;
  std::vector<std::vector<double>> q(H + 1);
  if (config.alg == AlgKind::kNashPi) {
    // Nash policy iteration evaluates its running policy; seed the tables
    // with the evaluation of the initial pair so the first improvement step
    // already sees a genuine Q function.
    const MarkovPolicy mu0 =
        config.init ? config.init->mu : MarkovPolicy::Uniform(game, 0);
    const MarkovPolicy nu0 =
        config.init ? config.init->nu : MarkovPolicy::Uniform(game, 1);
    ValueTables eval = policy_eval(game, mu0, nu0);
    for (int h = 1; h <= H; ++h)
      q[h].assign(eval.q.begin() + (h - 1) * slice, eval.q.begin() + h * slice);
  } else {
    for (int h = 1; h <= H; ++h) q[h].assign(slice, static_cast<double>(H - h + 1));
  }

  MarkovPolicy mu_t = MarkovPolicy::Uniform(game, 0);
  MarkovPolicy nu_t = MarkovPolicy::Uniform(game, 1);
  MarkovPolicy avg_mu = mu_t, avg_nu = nu_t;

  RunResult out;
  if (config.record_iterates) out.iterates.emplace();

  // Diagnostics state.
  std::vector<double> delta(H + 2, 0.0);      // delta_h^t this sweep
  std::vector<double> delta_mix(H + 1, 0.0);  // sum_i beta_t^i delta_{h+1}^i

  const std::vector<long> checkpoints = checkpoint_list(T, config.every);
  std::size_t next_cp = 0;

  std::vector<double> v_next(S, 0.0), v_curr(S, 0.0);
  std::vector<double> g_mu(A), g_nu(B);

  for (long t = 1; t <= T; ++t) {
    const double beta = config.schedule->beta(t);
    std::fill(v_next.begin(), v_next.end(), 0.0);
    for (int h = H; h >= 1; --h) {
      std::vector<double>& qh = q[h];
      for (int s = 0; s < S; ++s) {
        auto [mu, nu] = bank.at(h, s).step(&qh[static_cast<std::size_t>(s) * A * B]);
        std::copy(mu.begin(), mu.end(), mu_t.row(h, s));
        std::copy(nu.begin(), nu.end(), nu_t.row(h, s));
      }
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b) {
            double pv = 0.0;
            if (h < H) {
              const int joint = a * B + b;
              for (int sp = 0; sp < S; ++sp) pv += game.p(h, s, joint, sp) * v_next[sp];
            }
            double& cell = qh[(static_cast<std::size_t>(s) * A + a) * B + b];
            cell = (1.0 - beta) * cell + beta * (game.r2(h, s, a, b) + pv);
          }
        // Current-sweep value and losses at this state.
        const double* mu = mu_t.row(h, s);
        const double* nu = nu_t.row(h, s);
        double val = 0.0;
        for (int a = 0; a < A; ++a) {
          double row = 0.0;
          for (int b = 0; b < B; ++b)
            row += qh[(static_cast<std::size_t>(s) * A + a) * B + b] * nu[b];
          g_mu[a] = row;
          val += mu[a] * row;
        }
        for (int b = 0; b < B; ++b) {
          double col = 0.0;
          for (int a = 0; a < A; ++a)
            col += qh[(static_cast<std::size_t>(s) * A + a) * B + b] * mu[a];
          g_nu[b] = col;
        }
        v_curr[s] = val;
        bank.at(h, s).observe(g_mu, g_nu);
        if (config.diagnostics) {
          std::vector<double> mu_vec(mu, mu + A), nu_vec(nu, nu + B);
          bank.reg(h, s).observe(g_mu, g_nu, mu_vec, nu_vec);
        }
      }
      std::swap(v_next, v_curr);
    }

    if (uniform_avg) {
      mix_into(avg_mu, mu_t, 1.0 / t);
      mix_into(avg_nu, nu_t, 1.0 / t);
    } else {
      mix_into(avg_mu, mu_t, beta);
      mix_into(avg_nu, nu_t, beta);
    }

    if (config.record_iterates) {
      out.iterates->mu.push_back(mu_t.dist);
      out.iterates->nu.push_back(nu_t.dist);
      std::vector<double> qcat;
      for (int h = 1; h <= H; ++h) qcat.insert(qcat.end(), q[h].begin(), q[h].end());
      out.iterates->q.push_back(std::move(qcat));
    }

    if (config.diagnostics) {
      delta[H + 1] = 0.0;
      for (int h = 1; h <= H; ++h) {
        double d = 0.0;
        for (std::size_t i = 0; i < slice; ++i)
          d = std::max(d, std::fabs(q[h][i] - nash.values.q[(h - 1) * slice + i]));
        delta[h] = d;
      }
      for (int h = 1; h <= H; ++h)
        delta_mix[h] = (1.0 - beta) * delta_mix[h] + beta * delta[h + 1];
      for (int h = 1; h <= H; ++h) {
        double reg_next = 0.0;
        if (h < H)
          for (int s = 0; s < S; ++s) {
            reg_next = std::max(reg_next, bank.reg(h + 1, s).max_player_regret());
            reg_next = std::max(reg_next, bank.reg(h + 1, s).min_player_regret());
          }
        if (delta[h] > delta_mix[h] + reg_next + 1e-9) ++out.recursion_violations;
      }
    }

    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      ++next_cp;
      TraceRecord rec = make_trace_record(game, nash, avg_mu, avg_nu, t, clock.seconds());
      if (config.diagnostics) {
        rec.max_reg = bank_max_regret(bank, H, S);
        double dmax = 0.0;
        for (int h = 1; h <= H; ++h) dmax = std::max(dmax, delta[h]);
        rec.max_delta = dmax;
      }
      out.trace.push_back(std::move(rec));
    }
  }

  out.avg_mu = std::move(avg_mu);
  out.avg_nu = std::move(avg_nu);
  out.final_gap = out.trace.back().negap;
  return out;
}

// ---------------------------------------------------------------------------
// V-form driver (Nash V-learning / GDA-Critic)

RunResult run_v_form(const MarkovGame& game, const RunConfig& raw_config) {
  if (!game.zero_sum) throw Error("run_v_form requires a zero-sum game");
  RunConfig config = raw_config.normalized(game);
  if (config.alg != AlgKind::kFtrl && config.alg != AlgKind::kGda)
    throw Error("the V form supports only the ftrl and gda kinds");
  const int H = game.horizon, S = game.num_states;
  const int A = game.a_count(), B = game.b_count();
  const long T = config.iterations;
  const double eta = resolve_eta(config.eta, T, game);

  Stopwatch clock;
  const NashSolution nash = nash_values(game);
  LearnerBank bank = make_bank(game, config, eta, PredictionWeight::kPrevious);

  // V tables; index h runs 1..H, with the zero boundary handled separately.
  std::vector<std::vector<double>> v(H + 1);
  for (int h = 1; h <= H; ++h) v[h].assign(S, static_cast<double>(H - h + 1));

  MarkovPolicy mu_t = MarkovPolicy::Uniform(game, 0);
  MarkovPolicy nu_t = MarkovPolicy::Uniform(game, 1);
  MarkovPolicy avg_mu = mu_t, avg_nu = nu_t;

  RunResult out;
  if (config.record_iterates) out.iterates.emplace();

  const std::vector<long> checkpoints = checkpoint_list(T, config.every);
  std::size_t next_cp = 0;
  const std::size_t slice = static_cast<std::size_t>(S) * A * B;
  std::vector<double> zeros(S, 0.0);
  std::vector<double> g_mu(A), g_nu(B);
  std::vector<double> backup(slice);

  for (long t = 1; t <= T; ++t) {
    const double beta = config.schedule->beta(t);
    std::vector<double> qcat;
    for (int h = H; h >= 1; --h) {
      for (int s = 0; s < S; ++s) {
        auto [mu, nu] = bank.at(h, s).step(nullptr);
        std::copy(mu.begin(), mu.end(), mu_t.row(h, s));
        std::copy(nu.begin(), nu.end(), nu_t.row(h, s));
      }
      const std::vector<double>& v_next = h < H ? v[h + 1] : zeros;
      for (int s = 0; s < S; ++s) {
        // backup(s,a,b) = r_h + P_h V_{h+1}^t, the implied Q row.
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b) {
            double pv = 0.0;
            if (h < H) {
              const int joint = a * B + b;
              for (int sp = 0; sp < S; ++sp) pv += game.p(h, s, joint, sp) * v_next[sp];
            }
            backup[(static_cast<std::size_t>(s) * A + a) * B + b] =
                game.r2(h, s, a, b) + pv;
          }
        const double* mu = mu_t.row(h, s);
        const double* nu = nu_t.row(h, s);
        double val = 0.0;
        for (int a = 0; a < A; ++a) {
          double row = 0.0;
          for (int b = 0; b < B; ++b)
            row += backup[(static_cast<std::size_t>(s) * A + a) * B + b] * nu[b];
          g_mu[a] = row;
          val += mu[a] * row;
        }
        for (int b = 0; b < B; ++b) {
          double col = 0.0;
          for (int a = 0; a < A; ++a)
            col += backup[(static_cast<std::size_t>(s) * A + a) * B + b] * mu[a];
          g_nu[b] = col;
        }
        v[h][s] = (1.0 - beta) * v[h][s] + beta * val;
        bank.at(h, s).observe(g_mu, g_nu);
        if (config.diagnostics) {
          std::vector<double> mu_vec(mu, mu + A), nu_vec(nu, nu + B);
          bank.reg(h, s).observe(g_mu, g_nu, mu_vec, nu_vec);
        }
      }
      if (config.record_iterates) qcat.insert(qcat.begin(), backup.begin(), backup.end());
    }

    mix_into(avg_mu, mu_t, beta);
    mix_into(avg_nu, nu_t, beta);

    if (config.record_iterates) {
      out.iterates->mu.push_back(mu_t.dist);
      out.iterates->nu.push_back(nu_t.dist);
      out.iterates->q.push_back(std::move(qcat));
    }

    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      ++next_cp;
      TraceRecord rec = make_trace_record(game, nash, avg_mu, avg_nu, t, clock.seconds());
      if (config.diagnostics) rec.max_reg = bank_max_regret(bank, H, S);
      out.trace.push_back(std::move(rec));
    }
  }

  out.avg_mu = std::move(avg_mu);
  out.avg_nu = std::move(avg_nu);
  out.final_gap = out.trace.back().negap;
  return out;
}

// ---------------------------------------------------------------------------
// Modified OFTRL driver (per-player optimistic value estimates)

RunResult run_mod_oftrl(const MarkovGame& game, const RunConfig& raw_config) {
  if (!game.zero_sum) throw Error("run_mod_oftrl requires a zero-sum game");
  RunConfig config = raw_config.normalized(game);
  config.alg = AlgKind::kModOftrl;
  const int H = game.horizon, S = game.num_states;
  const int A = game.a_count(), B = game.b_count();
  const long T = config.iterations;
  const double eta = resolve_eta(config.eta, T, game);

  Stopwatch clock;
  const NashSolution nash = nash_values(game);
  LearnerBank bank = make_bank(game, config, eta, PredictionWeight::kCurrent);

  const std::size_t slice = static_cast<std::size_t>(S) * A * B;
  std::vector<std::vector<double>> q_hi(H + 1), q_lo(H + 1);
  std::vector<std::vector<double>> mix_hi(H + 1), mix_lo(H + 1);
  for (int h = 1; h <= H; ++h) {
    q_hi[h].assign(slice, static_cast<double>(H - h + 1));
    q_lo[h].assign(slice, 0.0);
    mix_hi[h].assign(static_cast<std::size_t>(S) * A, 0.0);
    mix_lo[h].assign(static_cast<std::size_t>(S) * B, 0.0);
  }

  MarkovPolicy mu_t = MarkovPolicy::Uniform(game, 0);
  MarkovPolicy nu_t = MarkovPolicy::Uniform(game, 1);
  MarkovPolicy avg_mu = mu_t, avg_nu = nu_t;

  RunResult out;
  const std::vector<long> checkpoints = checkpoint_list(T, config.every);
  std::size_t next_cp = 0;
  std::vector<double> g_hi(A), g_lo(B);

  std::vector<double> y_hi(S), y_lo(S);

  for (long t = 1; t <= T; ++t) {
    const double alpha = config.schedule->beta(t);
    for (int h = H; h >= 1; --h) {
      for (int s = 0; s < S; ++s) {
        auto [mu, nu] = bank.at(h, s).step(nullptr);
        std::copy(mu.begin(), mu.end(), mu_t.row(h, s));
        std::copy(nu.begin(), nu.end(), nu_t.row(h, s));
      }
      // Each player backs up the best response to the next layer's mixture
      // of its own value estimates.
      for (int sp = 0; sp < S; ++sp) {
        double best_hi = 0.0, best_lo = 0.0;
        if (h < H) {
          best_hi = mix_hi[h + 1][static_cast<std::size_t>(sp) * A];
          for (int ap = 1; ap < A; ++ap)
            best_hi = std::max(best_hi,
                               mix_hi[h + 1][static_cast<std::size_t>(sp) * A + ap]);
          best_lo = mix_lo[h + 1][static_cast<std::size_t>(sp) * B];
          for (int bp = 1; bp < B; ++bp)
            best_lo = std::min(best_lo,
                               mix_lo[h + 1][static_cast<std::size_t>(sp) * B + bp]);
        }
        y_hi[sp] = best_hi;
        y_lo[sp] = best_lo;
      }
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b) {
            double up = 0.0, low = 0.0;
            if (h < H) {
              const int joint = a * B + b;
              for (int sp = 0; sp < S; ++sp) {
                const double pr = game.p(h, s, joint, sp);
                up += pr * y_hi[sp];
                low += pr * y_lo[sp];
              }
            }
            const double r = game.r2(h, s, a, b);
            q_hi[h][(static_cast<std::size_t>(s) * A + a) * B + b] = r + up;
            q_lo[h][(static_cast<std::size_t>(s) * A + a) * B + b] = r + low;
          }
        const double* mu = mu_t.row(h, s);
        const double* nu = nu_t.row(h, s);
        for (int a = 0; a < A; ++a) {
          double row = 0.0;
          for (int b = 0; b < B; ++b)
            row += q_hi[h][(static_cast<std::size_t>(s) * A + a) * B + b] * nu[b];
          g_hi[a] = row;
        }
        for (int b = 0; b < B; ++b) {
          double col = 0.0;
          for (int a = 0; a < A; ++a)
            col += q_lo[h][(static_cast<std::size_t>(s) * A + a) * B + b] * mu[a];
          g_lo[b] = col;
        }
        for (int a = 0; a < A; ++a) {
          double& cell = mix_hi[h][static_cast<std::size_t>(s) * A + a];
          cell = (1.0 - alpha) * cell + alpha * g_hi[a];
        }
        for (int b = 0; b < B; ++b) {
          double& cell = mix_lo[h][static_cast<std::size_t>(s) * B + b];
          cell = (1.0 - alpha) * cell + alpha * g_lo[b];
        }
        bank.at(h, s).observe(g_hi, g_lo);
        if (config.diagnostics) {
          std::vector<double> mu_vec(mu, mu + A), nu_vec(nu, nu + B);
          bank.reg(h, s).observe(g_hi, g_lo, mu_vec, nu_vec);
        }
      }
    }

    mix_into(avg_mu, mu_t, alpha);
    mix_into(avg_nu, nu_t, alpha);

    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      ++next_cp;
      TraceRecord rec = make_trace_record(game, nash, avg_mu, avg_nu, t, clock.seconds());
      double dmax = 0.0, violation = 0.0;
      for (int h = 1; h <= H; ++h)
        for (std::size_t i = 0; i < slice; ++i) {
          const double star = nash.values.q[(h - 1) * slice + i];
          dmax = std::max(dmax, q_hi[h][i] - q_lo[h][i]);
          violation = std::max(violation, q_lo[h][i] - star);
          violation = std::max(violation, star - q_hi[h][i]);
        }
      out.max_sandwich_violation = std::max(out.max_sandwich_violation, violation);
      rec.max_delta = dmax;
      if (config.diagnostics) rec.max_reg = bank_max_regret(bank, H, S);
      out.trace.push_back(std::move(rec));
    }
  }

  out.avg_mu = std::move(avg_mu);
  out.avg_nu = std::move(avg_nu);
  out.final_gap = out.trace.back().negap;
  return out;
}

RunResult run(const MarkovGame& game, const RunConfig& config) {
  if (config.alg == AlgKind::kModOftrl) return run_mod_oftrl(game, config);
  if (config.v_form) return run_v_form(game, config);
  return run_framework(game, config);
}

// ---------------------------------------------------------------------------

RateFit fit_rate(const std::vector<std::pair<long, double>>& points) {
  if (points.size() < 3) throw Error("fit_rate needs at least three points");
  const int n = static_cast<int>(points.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    if (points[i].second <= 0.0)
      throw Error("fit_rate requires positive gaps (floor them upstream)");
    xs[i] = std::log(static_cast<double>(points[i].first));
    ys[i] = std::log(points[i].second);
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_rate requires at least two distinct T values");
  RateFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pred = fit.intercept + fit.exponent * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
  }
  fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace, int horizon) {
  std::string out = "t,negap";
  for (int h = 1; h <= horizon; ++h)
    out += ",negap_layer_" + std::to_string(h);
  out += ",max_reg,max_delta,elapsed_s\n";
  for (const TraceRecord& rec : trace) {
    out += std::to_string(rec.t) + "," + format_double(rec.negap);
    for (double g : rec.layer_gaps) out += "," + format_double(g);
    out += ",";
    if (rec.max_reg) out += format_double(*rec.max_reg);
    out += ",";
    if (rec.max_delta) out += format_double(*rec.max_delta);
    out += "," + format_double(rec.elapsed_s) + "\n";
  }
  return out;
}

void write_trace_csv(const std::vector<TraceRecord>& trace, int horizon,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << trace_to_csv(trace, horizon);
  if (!f) throw Error("write failed for " + path);
}

}  // namespace mg
