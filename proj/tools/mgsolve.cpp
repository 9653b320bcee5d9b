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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mg/eval_bench.hpp"
#include "mg/framework.hpp"
#include "mg/game.hpp"
#include "mg/general_sum.hpp"

namespace {

// Exit codes: 0 success, 1 runtime/solver error, 2 usage error.
struct UsageError : mg::Error {
  using mg::Error::Error;
};

struct LoadedGame {
  mg::MarkovGame game;
  std::optional<mg::PolicyPair> init;
};

LoadedGame resolve_game(const std::string& source) {
  if (source == "two-layer") {
    auto [game, init] = mg::make_two_layer_example();
    return {std::move(game), std::move(init)};
  }
  return {mg::load_game(source), std::nullopt};
}

std::vector<long> parse_grid(const std::string& text) {
  std::vector<long> grid;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    try {
      grid.push_back(std::stol(text.substr(pos, comma - pos)));
    } catch (const std::exception&) {
      throw UsageError("bad T grid entry in: " + text);
    }
    pos = comma + 1;
  }
  return grid;
}

int cmd_make_game(const std::string& kind, std::uint64_t seed, int horizon,
                  int states, const std::string& actions, int players,
                  bool general_sum, const std::string& out,
                  std::string init_out) {
  if (kind == "two-layer") {
    auto [game, init] = mg::make_two_layer_example();
    mg::save_game(game, out);
    if (init_out.empty()) {
      init_out = out;
      const auto dot = init_out.rfind(".json");
      if (dot != std::string::npos) init_out.erase(dot);
      init_out += "_init.json";
    }
    mg::save_policy_pair(init, init_out);
    std::cout << out << "\n" << init_out << "\n";
    return 0;
  }
  if (kind == "random") {
    std::vector<int> counts;
    for (long a : parse_grid(actions)) counts.push_back(static_cast<int>(a));
    if (counts.empty()) throw UsageError("--actions must list at least one count");
    while (static_cast<int>(counts.size()) < players) counts.push_back(counts.back());
    mg::MarkovGame game = mg::make_random_game(seed, horizon, states, counts,
                                               players, !general_sum);
    mg::save_game(game, out);
    std::cout << out << "\n";
    return 0;
  }
  throw UsageError("unknown game kind: " + kind + " (expected two-layer|random)");
}

int cmd_solve(const std::string& game_src, const std::string& alg,
              const std::string& schedule, std::string eta, long iters,
              std::uint64_t seed, const std::string& trace, long every,
              bool diagnostics, bool kl_base, bool v_form,
              const std::string& init_path, const std::string& policy_out) {
  LoadedGame loaded = resolve_game(game_src);
  if (!init_path.empty()) loaded.init = mg::load_policy_pair(init_path);

  if (!loaded.game.zero_sum) {
    if (alg != "oftrl" && alg != "gs-oftrl")
      throw UsageError("general-sum games support only the oftrl algorithm");
    mg::GsRunConfig config;
    try {
      config.eta = eta.empty()
                       ? mg::EtaSpec::FromPreset(mg::EtaSpec::Preset::kGsOftrl)
                       : mg::EtaSpec::Parse(eta);
    } catch (const mg::Error& e) {
      throw UsageError(e.what());
    }
    config.iterations = iters;
    config.every = every;
    config.seed = seed;
    mg::GsRunResult result = mg::run_general_sum_oftrl(loaded.game, config);
    if (!trace.empty()) mg::write_gs_trace_csv(result.trace, trace);
    if (!policy_out.empty()) mg::save_certified_policy(result.policy, policy_out);
    std::cout << mg::format_double(result.final_ccegap) << "\n";
    return 0;
  }

  mg::RunConfig config;
  if (alg == "gs-oftrl") throw UsageError("gs-oftrl requires a general-sum game");
  try {
    config.alg = mg::alg_from_name(alg);
    if (eta.empty()) eta = mg::AlgSpec::Default(alg).eta.str();
    config.eta = mg::EtaSpec::Parse(eta);
  } catch (const mg::Error& e) {
    throw UsageError(e.what());
  }
  if (schedule == "alpha")
    config.schedule = mg::Schedule::Alpha(loaded.game.horizon);
  else if (schedule == "eager")
    config.schedule = mg::Schedule::Eager();
  else if (!schedule.empty())
    throw UsageError("unknown schedule: " + schedule + " (expected alpha|eager)");
  config.iterations = iters;
  config.every = every;
  config.seed = seed;
  config.v_form = v_form;
  config.kl_base_point = kl_base;
  config.diagnostics = diagnostics;
  config.init = loaded.init;
  mg::RunResult result = mg::run(loaded.game, config);
  if (!trace.empty())
    mg::write_trace_csv(result.trace, loaded.game.horizon, trace);
  if (!policy_out.empty())
    mg::save_policy_pair({result.avg_mu, result.avg_nu}, policy_out);
  std::cout << mg::format_double(result.final_gap) << "\n";
  return 0;
}

int cmd_sweep(const std::string& game_src, const std::string& algs,
              const std::string& grid, const std::string& out_dir, int threads,
              bool do_check_bounds, std::uint64_t seed,
              const std::string& init_path) {
  LoadedGame loaded = resolve_game(game_src);
  if (!init_path.empty()) loaded.init = mg::load_policy_pair(init_path);

  mg::SweepPlan plan;
  plan.game = std::move(loaded.game);
  plan.init = std::move(loaded.init);
  plan.t_grid = grid.empty() ? mg::SweepPlan::default_grid() : parse_grid(grid);
  plan.out_dir = out_dir;
  plan.threads = threads;
  plan.seed = seed;

  std::size_t pos = 0;
  while (pos < algs.size()) {
    std::size_t comma = algs.find(',', pos);
    if (comma == std::string::npos) comma = algs.size();
    const std::string token = algs.substr(pos, comma - pos);
    pos = comma + 1;
    if (token.empty()) continue;
    const std::size_t at = token.find('@');
    try {
      mg::AlgSpec spec = mg::AlgSpec::Default(token.substr(0, at));
      if (at != std::string::npos) {
        spec.label = token;
        spec.eta = mg::EtaSpec::Parse(token.substr(at + 1));
      }
      plan.algorithms.push_back(std::move(spec));
    } catch (const mg::Error& e) {
      throw UsageError(e.what());
    }
  }

  mg::SweepReport report = mg::run_sweep(plan);
  bool bounds_ok = true;
  if (do_check_bounds) bounds_ok = mg::check_bounds(report, mg::standard_bounds());
  mg::emit_report(report, plan.out_dir);
  for (const mg::FitRow& row : report.fits) {
    std::cout << row.algorithm << ": ";
    if (row.fit)
      std::cout << "exponent " << mg::format_double(row.fit->exponent);
    else
      std::cout << row.note;
    std::cout << "\n";
  }
  return bounds_ok ? 0 : 1;
}

int cmd_eval(const std::string& game_src, const std::string& metric,
             const std::string& mu_path, const std::string& nu_path,
             const std::string& pair_path, const std::string& certified_path) {
  LoadedGame loaded = resolve_game(game_src);
  if (metric == "negap") {
    if (!loaded.game.zero_sum)
      throw UsageError("negap is defined for zero-sum games only");
    mg::PolicyPair pair;
    if (mu_path.empty() != nu_path.empty())
      throw UsageError("--mu and --nu must be given together");
    if (!pair_path.empty()) {
      pair = mg::load_policy_pair(pair_path);
    } else if (!mu_path.empty()) {
      pair.mu = mg::load_policy(mu_path);
      pair.nu = mg::load_policy(nu_path);
    } else if (loaded.init) {
      pair = *loaded.init;  // the built-in game evaluates its initialization
    } else {
      throw UsageError("negap needs --policies or --mu and --nu");
    }
    if (pair.mu.horizon != loaded.game.horizon ||
        pair.mu.num_states != loaded.game.num_states ||
        pair.mu.num_actions != loaded.game.a_count() ||
        pair.nu.num_actions != loaded.game.b_count())
      throw mg::Error("policy shape does not match the game");
    std::cout << mg::format_double(mg::ne_gap(loaded.game, pair.mu, pair.nu))
              << "\n";
    return 0;
  }
  if (metric == "ccegap") {
    if (loaded.game.zero_sum)
      throw UsageError("ccegap is defined for general-sum games only");
    if (certified_path.empty()) throw UsageError("ccegap needs --certified");
    mg::CertifiedPolicy policy =
        mg::load_certified_policy(certified_path, loaded.game);
    std::cout << mg::format_double(mg::cce_gap(loaded.game, policy)) << "\n";
    return 0;
  }
  throw UsageError("unknown metric: " + metric + " (expected negap|ccegap)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon Markov game solver and benchmark harness"};
  app.require_subcommand(1);

  // make-game
  auto* mk = app.add_subcommand("make-game", "Write a game file");
  std::string mk_kind, mk_out, mk_init_out, mk_actions = "2";
  std::uint64_t mk_seed = 0;
  int mk_h = 2, mk_s = 4, mk_players = 2;
  bool mk_general = false;
  mk->add_option("--kind", mk_kind, "two-layer|random")->required();
  mk->add_option("--out", mk_out, "output game JSON path")->required();
  mk->add_option("--init-out", mk_init_out, "initialization policy-pair path");
  mk->add_option("--seed", mk_seed, "random seed");
  mk->add_option("--horizon", mk_h, "steps (random games)");
  mk->add_option("--states", mk_s, "state count (random games)");
  mk->add_option("--actions", mk_actions, "per-player action counts, comma separated");
  mk->add_option("--players", mk_players, "player count (random games)");
  mk->add_flag("--general-sum", mk_general, "per-player rewards instead of zero-sum");

  // solve
  auto* sv = app.add_subcommand("solve", "Run one algorithm on one game");
  std::string sv_game, sv_alg, sv_schedule, sv_eta, sv_trace, sv_init,
              sv_policy_out;
  long sv_iters = 1000, sv_every = 0;
  std::uint64_t sv_seed = 0;
  bool sv_diag = false, sv_kl = false, sv_vform = false;
  sv->add_option("--game", sv_game, "game JSON path or 'two-layer'")->required();
  sv->add_option("--alg", sv_alg,
                 "ftrl|oftrl|gda|nash-q|nash-pi|inpg|mod-oftrl|gs-oftrl")
      ->required();
  sv->add_option("--schedule", sv_schedule, "alpha|eager (defaults to the kind)");
  sv->add_option("--eta", sv_eta, "learning rate: float, float*T^p, or preset");
  sv->add_option("--iters", sv_iters, "iteration count T");
  sv->add_option("--seed", sv_seed, "seed");
  sv->add_option("--trace", sv_trace, "trace CSV output path");
  sv->add_option("--every", sv_every, "trace cadence (0 = geometric)");
  sv->add_flag("--diagnostics", sv_diag, "record regrets and value errors");
  sv->add_flag("--kl-base", sv_kl, "regularize toward the initialization");
  sv->add_flag("--v-form", sv_vform, "run the V-table form (ftrl/gda)");
  sv->add_option("--init", sv_init, "initialization policy-pair file");
  sv->add_option("--policy-out", sv_policy_out, "final policy output path");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run an algorithm/T grid");
  std::string sw_game, sw_algs, sw_grid, sw_out = "sweep_out", sw_init;
  int sw_threads = 0;
  bool sw_bounds = false;
  std::uint64_t sw_seed = 0;
  sw->add_option("--game", sw_game, "game JSON path or 'two-layer'")->required();
  sw->add_option("--algs", sw_algs, "comma list, each alg or alg@eta")->required();
  sw->add_option("--t-grid", sw_grid, "comma list of T values");
  sw->add_option("--out-dir", sw_out, "report directory");
  sw->add_option("--threads", sw_threads, "worker cap (1 = sequential)");
  sw->add_flag("--check-bounds", sw_bounds, "verify closed-form gap bounds");
  sw->add_option("--seed", sw_seed, "seed");
  sw->add_option("--init", sw_init, "initialization policy-pair file");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a stored policy");
  std::string ev_game, ev_metric = "negap", ev_mu, ev_nu, ev_pair, ev_cert;
  ev->add_option("--game", ev_game, "game JSON path or 'two-layer'")->required();
  ev->add_option("--metric", ev_metric, "negap|ccegap");
  ev->add_option("--mu", ev_mu, "max-player policy file");
  ev->add_option("--nu", ev_nu, "min-player policy file");
  ev->add_option("--policies", ev_pair, "policy-pair file");
  ev->add_option("--certified", ev_cert, "certified policy JSONL file");

  try {
    app.parse(argc, argv);
    if (mk->parsed())
      return cmd_make_game(mk_kind, mk_seed, mk_h, mk_s, mk_actions, mk_players,
                           mk_general, mk_out, mk_init_out);
    if (sv->parsed())
      return cmd_solve(sv_game, sv_alg, sv_schedule, sv_eta, sv_iters, sv_seed,
                       sv_trace, sv_every, sv_diag, sv_kl, sv_vform, sv_init,
                       sv_policy_out);
    if (sw->parsed())
      return cmd_sweep(sw_game, sw_algs, sw_grid, sw_out, sw_threads, sw_bounds,
                       sw_seed, sw_init);
    if (ev->parsed())
      return cmd_eval(ev_game, ev_metric, ev_mu, ev_nu, ev_pair, ev_cert);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
