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

#include "mg/eval_bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

namespace mg {

namespace {

struct CellJob {
  AlgSpec spec;
  long iterations = 0;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("write failed for " + path);
}

}  // namespace

AlgSpec AlgSpec::Default(const std::string& name) {
  AlgSpec spec;
  spec.label = name;
  if (name == "gs-oftrl") {
    spec.general_sum = true;
    spec.eta = EtaSpec::FromPreset(EtaSpec::Preset::kGsOftrl);
    return spec;
  }
  spec.alg = alg_from_name(name);
  switch (spec.alg) {
    case AlgKind::kFtrl:
      spec.eta = EtaSpec::FromPreset(EtaSpec::Preset::kNashV);
      break;
    case AlgKind::kOftrl:
      spec.eta = EtaSpec::FromPreset(EtaSpec::Preset::kOftrl56);
      break;
    case AlgKind::kGda:
      spec.eta = EtaSpec::FromPreset(EtaSpec::Preset::kGda);
      break;
    case AlgKind::kModOftrl:
      spec.eta = EtaSpec::FromPreset(EtaSpec::Preset::kModOftrl);
      break;
    case AlgKind::kInpg:
      spec.eta = EtaSpec::Power(1.0, -0.5);
      break;
    case AlgKind::kNashQ:
    case AlgKind::kNashPi:
      spec.eta = EtaSpec::Const(0.0);  // unused by the matrix-NE learner
      break;
  }
  return spec;
}

void SweepPlan::validate() const {
  if (algorithms.empty()) throw Error("sweep plan has no algorithms");
  if (t_grid.empty()) throw Error("sweep plan has an empty T grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] <= t_grid[i - 1])
      throw Error("sweep T grid must be strictly increasing");
  if (t_grid.front() < 1) throw Error("sweep T grid entries must be >= 1");
}

std::vector<long> SweepPlan::default_grid() {
  return {100, 300, 1000, 3000, 10000, 30000, 100000};
}

SweepReport run_sweep(const SweepPlan& plan) {
  plan.validate();
  SweepReport report;
  report.horizon = plan.game.horizon;
  report.a_count = plan.game.action_counts[0];
  report.b_count = plan.game.action_counts.size() > 1 ? plan.game.action_counts[1]
                                                      : plan.game.action_counts[0];

  std::vector<CellJob> jobs;
  for (const AlgSpec& spec : plan.algorithms)
    for (long T : plan.t_grid) jobs.push_back({spec, T});
  report.cells.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      const CellJob& job = jobs[idx];
      SweepCell& cell = report.cells[idx];
      cell.algorithm = job.spec.label;
      cell.iterations = job.iterations;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (job.spec.general_sum) {
          GsRunConfig config;
          config.eta = job.spec.eta;
          config.iterations = job.iterations;
          config.seed = plan.seed;
          cell.eta = resolve_eta(config.eta, config.iterations, plan.game);
          GsRunResult result = run_general_sum_oftrl(plan.game, config);
          cell.gap = result.final_ccegap;
        } else {
          RunConfig config;
          config.alg = job.spec.alg;
          config.schedule = Schedule::Alpha(plan.game.horizon);
          config.eta = job.spec.eta;
          config.iterations = job.iterations;
          config.seed = plan.seed;
          config.v_form = job.spec.v_form;
          config.kl_base_point = job.spec.kl_base_point;
          config.init = plan.init;
          cell.eta = resolve_eta(config.eta, config.iterations, plan.game);
          RunResult result = run(plan.game, config);
          cell.gap = result.final_gap;
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cell.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
    }
  };

  int threads = plan.threads > 0 ? plan.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  // Rate fit per algorithm, in plan order.
  for (const AlgSpec& spec : plan.algorithms) {
    FitRow row;
    row.algorithm = spec.label;
    std::vector<std::pair<long, double>> points;
    bool all_floored = true;
    for (const SweepCell& cell : report.cells) {
      if (cell.algorithm != spec.label || !cell.error.empty()) continue;
      const double floored = std::max(cell.gap, kGapFloor);
      if (floored > kGapFloor) all_floored = false;
      points.emplace_back(cell.iterations, floored);
    }
    if (points.empty()) {
      row.note = "no successful runs";
    } else if (all_floored) {
      row.note = "exact";
    } else if (points.size() < 3) {
      row.note = "needs at least 3 points";
    } else {
      row.fit = fit_rate(points);
    }
    report.fits.push_back(std::move(row));
  }
  return report;
}

double BoundSpec::bound(long T, int H, int A, int B, double eta) const {
  const double t = static_cast<double>(T);
  const double h = static_cast<double>(H);
  const double logt = std::log(t);
  const double log_ab_max = std::log(static_cast<double>(std::max(A, B)));
  (void)eta;
  switch (alg) {
    case AlgKind::kFtrl:
      return 82.0 * log_ab_max * logt * logt * std::pow(h, 3.5) / std::sqrt(t);
    case AlgKind::kGda:
      return 108.0 * logt * logt * std::sqrt(static_cast<double>(std::max(A, B))) *
             std::pow(h, 3.5) / std::sqrt(t);
    case AlgKind::kNashQ:
      return 112.0 * logt * logt * std::pow(h, 4.0) / t;
    case AlgKind::kModOftrl:
      return 468.0 * std::pow(h, 4.0) * std::log(static_cast<double>(A) * B) *
             (logt + 1.0) * (logt + 1.0) / t;
    default:
      throw Error("no closed-form bound for " + alg_name(alg));
  }
}

std::string BoundSpec::name() const { return alg_name(alg); }

std::vector<BoundSpec> standard_bounds() {
  return {BoundSpec{AlgKind::kFtrl}, BoundSpec{AlgKind::kGda},
          BoundSpec{AlgKind::kNashQ}, BoundSpec{AlgKind::kModOftrl}};
}

bool check_bounds(SweepReport& report, const std::vector<BoundSpec>& specs) {
  report.bounds.clear();
  bool all_pass = true;
  for (const SweepCell& cell : report.cells) {
    AlgKind kind;
    try {
      kind = alg_from_name(cell.algorithm);
    } catch (const Error&) {
      continue;  // decorated labels and general-sum rows have no bound
    }
    const BoundSpec* match = nullptr;
    for (const BoundSpec& spec : specs)
      if (spec.alg == kind) match = &spec;
    if (match == nullptr) continue;
    if (!cell.error.empty()) {
      all_pass = false;
      continue;
    }
    BoundRow row;
    row.algorithm = cell.algorithm;
    row.iterations = cell.iterations;
    row.eta = cell.eta;
    row.gap = cell.gap;
    row.bound = match->bound(cell.iterations, report.horizon, report.a_count,
                             report.b_count, cell.eta);
    row.pass = row.gap <= row.bound;
    if (!row.pass) all_pass = false;
    report.bounds.push_back(row);
  }
  return all_pass;
}

namespace {

// Palette shared by the SVG plots.
const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (log10 T, log10 gap)
  std::optional<RateFit> fit;
};

std::string svg_plot(const std::vector<Series>& series, const std::string& title) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  // 10% padding around the data extent (5% each side), with a fallback for
  // degenerate ranges.
  auto pad = [](double& lo, double& hi) {
    const double range = hi - lo;
    const double d = range > 0.0 ? 0.05 * range : 0.5;
    lo -= d;
    hi += d;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);

  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto sy = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
         "viewBox=\"0 0 640 480\" width=\"640\" height=\"480\">\n";
  out += "<!-- generated " + std::string(stamp) + " -->\n";
  out += "<rect id=\"plot\" x=\"" + format_double(ml) + "\" y=\"" + format_double(mt) +
         "\" width=\"" + format_double(width - ml - mr) + "\" height=\"" +
         format_double(height - mt - mb) + "\" fill=\"none\" stroke=\"#333\"" +
         " data-xmin=\"" + format_double(xmin) + "\" data-xmax=\"" + format_double(xmax) +
         "\" data-ymin=\"" + format_double(ymin) + "\" data-ymax=\"" +
         format_double(ymax) + "\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title +
         " (log-log)</text>\n";

  // Decade ticks.
  for (long k = static_cast<long>(std::ceil(xmin)); k <= static_cast<long>(std::floor(xmax)); ++k) {
    const double px = sx(static_cast<double>(k));
    out += "<line x1=\"" + format_double(px) + "\" y1=\"" + format_double(height - mb) +
           "\" x2=\"" + format_double(px) + "\" y2=\"" + format_double(height - mb + 6) +
           "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + format_double(px) + "\" y=\"" + format_double(height - mb + 20) +
           "\" text-anchor=\"middle\" font-size=\"12\">1e" + std::to_string(k) +
           "</text>\n";
  }
  for (long k = static_cast<long>(std::ceil(ymin)); k <= static_cast<long>(std::floor(ymax)); ++k) {
    const double py = sy(static_cast<double>(k));
    out += "<line x1=\"" + format_double(ml - 6) + "\" y1=\"" + format_double(py) +
           "\" x2=\"" + format_double(ml) + "\" y2=\"" + format_double(py) +
           "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + format_double(ml - 10) + "\" y=\"" + format_double(py + 4) +
           "\" text-anchor=\"end\" font-size=\"12\">1e" + std::to_string(k) +
           "</text>\n";
  }

  int color_idx = 0;
  double legend_y = mt + 16;
  for (const Series& s : series) {
    const char* color = kColors[color_idx++ % 8];
    for (auto [x, y] : s.points)
      out += "<circle cx=\"" + format_double(sx(x)) + "\" cy=\"" + format_double(sy(y)) +
             "\" r=\"3.5\" fill=\"" + color + "\"/>\n";
    if (s.fit && s.points.size() >= 2) {
      // The fit lives in natural-log space; draw it across the x extent.
      const double ln10 = std::log(10.0);
      auto fit_y = [&](double x10) {
        return (s.fit->intercept + s.fit->exponent * x10 * ln10) / ln10;
      };
      out += "<line x1=\"" + format_double(sx(xmin)) + "\" y1=\"" +
             format_double(sy(fit_y(xmin))) + "\" x2=\"" + format_double(sx(xmax)) +
             "\" y2=\"" + format_double(sy(fit_y(xmax))) + "\" stroke=\"" + color +
             "\" stroke-dasharray=\"5,3\"/>\n";
    }
    std::string legend = s.label;
    if (s.fit) legend += " ~ T^" + format_double(s.fit->exponent).substr(0, 7);
    out += "<text x=\"" + format_double(width - mr - 8) + "\" y=\"" +
           format_double(legend_y) + "\" text-anchor=\"end\" font-size=\"12\" fill=\"" +
           color + "\">" + legend + "</text>\n";
    legend_y += 16;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace

void emit_report(const SweepReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());

  std::string summary = "algorithm,T,eta,gap,seconds,error\n";
  for (const SweepCell& cell : report.cells) {
    summary += csv_escape(cell.algorithm) + "," + std::to_string(cell.iterations) + ",";
    summary += format_double(cell.eta) + ",";
    if (cell.error.empty()) summary += format_double(cell.gap);
    summary += "," + format_double(cell.seconds) + "," + csv_escape(cell.error) + "\n";
  }
  write_text(dir + "/summary.csv", summary);

  std::string fits = "algorithm,exponent,intercept,r_squared,note\n";
  for (const FitRow& row : report.fits) {
    fits += csv_escape(row.algorithm) + ",";
    if (row.fit)
      fits += format_double(row.fit->exponent) + "," + format_double(row.fit->intercept) +
              "," + format_double(row.fit->r_squared);
    else
      fits += ",,";
    fits += "," + csv_escape(row.note) + "\n";
  }
  write_text(dir + "/fits.csv", fits);

  std::string bounds = "algorithm,T,eta,gap,bound,pass\n";
  for (const BoundRow& row : report.bounds)
    bounds += csv_escape(row.algorithm) + "," + std::to_string(row.iterations) + "," +
              format_double(row.eta) + "," + format_double(row.gap) + "," +
              format_double(row.bound) + "," + (row.pass ? "1" : "0") + "\n";
  write_text(dir + "/bounds.csv", bounds);

  // One SVG per metric present in the report.
  std::map<bool, std::vector<Series>> by_metric;  // false = negap, true = ccegap
  for (const FitRow& fit_row : report.fits) {
    Series s;
    s.label = fit_row.algorithm;
    s.fit = fit_row.fit;
    bool general_sum = false;
    for (const SweepCell& cell : report.cells) {
      if (cell.algorithm != fit_row.algorithm || !cell.error.empty()) continue;
      general_sum = cell.algorithm.rfind("gs-", 0) == 0;
      s.points.emplace_back(std::log10(static_cast<double>(cell.iterations)),
                            std::log10(std::max(cell.gap, kGapFloor)));
    }
    if (!s.points.empty()) by_metric[general_sum].push_back(std::move(s));
  }
  if (by_metric.count(false))
    write_text(dir + "/negap.svg", svg_plot(by_metric[false], "NE gap"));
  if (by_metric.count(true))
    write_text(dir + "/ccegap.svg", svg_plot(by_metric[true], "CCE gap"));
}

}  // namespace mg
