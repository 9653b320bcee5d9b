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

#include "mg/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numeric>
#include <string>

namespace mg {

std::vector<double> project_simplex(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  if (n == 0) throw Error("project_simplex: empty input");
  for (double x : v)
    if (!std::isfinite(x)) throw Error("project_simplex: non-finite input");
  std::vector<double> sorted(v);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double running = 0.0, tau = 0.0;
  for (int i = 0; i < n; ++i) {
    running += sorted[i];
    const double candidate = (running - 1.0) / (i + 1);
    if (sorted[i] - candidate > 0.0) tau = candidate;
  }
  std::vector<double> out(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::max(v[i] - tau, 0.0);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

// ---------------------------------------------------------------------------
// Matrix Nash via the minimax LP.
//
// After shifting M to have entries >= 1, the column player's problem
//   max sum(y)  s.t.  M y <= 1, y >= 0
// and its dual (the row player's problem) are solved with one simplex run.
// The equilibrium is y / sum(y) and x / sum(x), and the game value is
// 1 / sum(y) minus the shift.

namespace {

struct Tableau {
  int rows, cols;                 // constraint count, structural var count
  std::vector<double> a;          // rows x (cols + rows) with slack identity
  std::vector<double> rhs;        // rows
  std::vector<double> obj;        // cols + rows, maximization
  std::vector<int> basis;         // rows
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * (cols + rows) + j]; }
};

// Bland's rule simplex; returns false only on unboundedness, which cannot
// occur for this bounded program.
bool simplex_solve(Tableau& t, long max_pivots) {
  const int total = t.cols + t.rows;
  for (long pivot = 0; pivot < max_pivots; ++pivot) {
    // Reduced costs: c_j - c_B B^{-1} A_j. The tableau is kept in canonical
    // form, so the objective row is updated in place and the entering column
    // is simply the lowest index with a positive coefficient.
    int enter = -1;
    for (int j = 0; j < total; ++j) {
      if (t.obj[j] > 1e-11) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;
    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < t.rows; ++i) {
      const double coef = t.at(i, enter);
      if (coef > 1e-11) {
        const double ratio = t.rhs[i] / coef;
        if (leave < 0 || ratio < best_ratio - 1e-15 ||
            (std::fabs(ratio - best_ratio) <= 1e-15 && t.basis[i] < t.basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) return false;
    // Pivot.
    const double piv = t.at(leave, enter);
    for (int j = 0; j < total; ++j) t.at(leave, j) /= piv;
    t.rhs[leave] /= piv;
    for (int i = 0; i < t.rows; ++i) {
      if (i == leave) continue;
      const double f = t.at(i, enter);
      if (f == 0.0) continue;
      for (int j = 0; j < total; ++j) t.at(i, j) -= f * t.at(leave, j);
      t.rhs[i] -= f * t.rhs[leave];
    }
    const double fo = t.obj[enter];
    for (int j = 0; j < total; ++j) t.obj[j] -= fo * t.at(leave, j);
    t.basis[leave] = enter;
  }
  return false;
}

}  // namespace

MatrixNeSolution matrix_ne(const std::vector<double>& m, int rows, int cols) {
  if (rows < 1 || cols < 1 || m.size() != static_cast<std::size_t>(rows) * cols)
    throw Error("matrix_ne: bad shape");
  double lo = m[0], hi = m[0];
  for (double x : m) {
    if (!std::isfinite(x)) throw Error("matrix_ne: non-finite entry");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }

  MatrixNeSolution out;
  const double spread = hi - lo;
  if (spread <= 1e-13 * std::max(1.0, std::fabs(lo))) {
    // Constant matrix: every strategy is optimal; return the uniform pair.
    out.row.assign(rows, 1.0 / rows);
    out.col.assign(cols, 1.0 / cols);
    out.value = std::accumulate(m.begin(), m.end(), 0.0) / m.size();
    out.gap = 0.0;
    return out;
  }

  // Equilibria are invariant under positive affine maps, so solve on the
  // normalized matrix (m - lo)/spread + 1 with entries in [1, 2].
  Tableau t;
  t.rows = rows;
  t.cols = cols;
  t.a.assign(static_cast<std::size_t>(rows) * (cols + rows), 0.0);
  t.rhs.assign(rows, 1.0);
  t.obj.assign(cols + rows, 0.0);
  t.basis.resize(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j)
      t.at(i, j) = (m[static_cast<std::size_t>(i) * cols + j] - lo) / spread + 1.0;
    t.at(i, cols + i) = 1.0;
    t.basis[i] = cols + i;
  }
  for (int j = 0; j < cols; ++j) t.obj[j] = 1.0;

  if (!simplex_solve(t, 200L * (rows + cols) * (rows + cols) + 1000))
    throw Error("matrix_ne: simplex did not terminate");

  std::vector<double> y(cols, 0.0);
  for (int i = 0; i < rows; ++i)
    if (t.basis[i] < cols) y[t.basis[i]] = t.rhs[i];
  // Dual solution appears as the negated objective coefficients of slacks.
  std::vector<double> x(rows, 0.0);
  for (int i = 0; i < rows; ++i) x[i] = -t.obj[cols + i];

  double ysum = std::accumulate(y.begin(), y.end(), 0.0);
  double xsum = std::accumulate(x.begin(), x.end(), 0.0);
  if (ysum <= 0.0 || xsum <= 0.0) throw Error("matrix_ne: degenerate LP solution");
  out.col.resize(cols);
  out.row.resize(rows);
  for (int j = 0; j < cols; ++j) out.col[j] = std::max(y[j], 0.0) / ysum;
  for (int i = 0; i < rows; ++i) out.row[i] = std::max(x[i], 0.0) / xsum;
  // Renormalize after clipping.
  double cs = std::accumulate(out.col.begin(), out.col.end(), 0.0);
  double rs = std::accumulate(out.row.begin(), out.row.end(), 0.0);
  for (double& v : out.col) v /= cs;
  for (double& v : out.row) v /= rs;

  double value = 0.0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      value += out.row[i] * m[static_cast<std::size_t>(i) * cols + j] * out.col[j];
  out.value = value;

  double best_row = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < rows; ++i) {
    double v = 0.0;
    for (int j = 0; j < cols; ++j)
      v += m[static_cast<std::size_t>(i) * cols + j] * out.col[j];
    best_row = std::max(best_row, v);
  }
  double best_col = std::numeric_limits<double>::infinity();
  for (int j = 0; j < cols; ++j) {
    double v = 0.0;
    for (int i = 0; i < rows; ++i)
      v += m[static_cast<std::size_t>(i) * cols + j] * out.row[i];
    best_col = std::min(best_col, v);
  }
  out.gap = best_row - best_col;
  // Residuals scale with the payoff spread; unit-scale inputs get the
  // absolute 1e-9 certificate.
  if (!(out.gap <= 1e-9 * std::max(1.0, spread))) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", out.gap);
    throw Error(std::string("matrix_ne: residual duality gap ") + buf);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TwoPlayerLearner

TwoPlayerLearner::TwoPlayerLearner(const LearnerConfig& config, int num_a,
                                   int num_b, const Schedule& schedule)
    : config_(config), schedule_(&schedule), num_a_(num_a), num_b_(num_b) {
  if ((config.kind == LearnerKind::kFtrl || config.kind == LearnerKind::kOftrl) &&
      schedule.kind() != Schedule::Kind::kAlpha)
    throw Error("weighted FTRL/OFTRL requires the Alpha schedule");
  sum_mu_.assign(num_a_, 0.0);
  sum_nu_.assign(num_b_, 0.0);
  cum_mu_.assign(num_a_, 0.0);
  cum_nu_.assign(num_b_, 0.0);
  last_g_mu_.assign(num_a_, 0.0);
  last_g_nu_.assign(num_b_, 0.0);
  mu_prev_ = config.base_mu.empty() ? std::vector<double>(num_a_, 1.0 / num_a_)
                                    : config.base_mu;
  nu_prev_ = config.base_nu.empty() ? std::vector<double>(num_b_, 1.0 / num_b_)
                                    : config.base_nu;
  if (static_cast<int>(mu_prev_.size()) != num_a_ ||
      static_cast<int>(nu_prev_.size()) != num_b_)
    throw Error("learner base point has wrong shape");
}

std::vector<double> TwoPlayerLearner::softmax_policy(
    const std::vector<double>& exponent, const std::vector<double>& base) const {
  const int n = static_cast<int>(exponent.size());
  std::vector<double> z(n);
  double zmax = -std::numeric_limits<double>::infinity();
  const bool with_base = !base.empty();
  for (int i = 0; i < n; ++i) {
    z[i] = exponent[i] + (with_base ? std::log(base[i]) : 0.0);
    zmax = std::max(zmax, z[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    z[i] = std::exp(z[i] - zmax);
    sum += z[i];
  }
  for (double& v : z) v /= sum;
  return z;
}

std::pair<std::vector<double>, std::vector<double>> TwoPlayerLearner::step(
    const double* q_prev) {
  const long t = t_ + 1;
  const double eta = config_.eta;
  std::vector<double> mu, nu;
  switch (config_.kind) {
    case LearnerKind::kFtrl: {
      // exp( (eta / w_{t-1}) sum_{i<=t-1} w_i g_i ) = exp(eta * N^{t-1}).
      std::vector<double> ea(num_a_), eb(num_b_);
      for (int i = 0; i < num_a_; ++i) ea[i] = eta * sum_mu_[i];
      for (int i = 0; i < num_b_; ++i) eb[i] = -eta * sum_nu_[i];
      mu = softmax_policy(ea, config_.base_mu);
      nu = softmax_policy(eb, config_.base_nu);
      break;
    }
    case LearnerKind::kOftrl: {
      // exp( (eta / w_t) [ sum_{i<=t-1} w_i g_i + w_pred g_{t-1} ] ),
      // w_pred = w_{t-1} or w_t depending on the configured mode.
      const double rho = 1.0 / schedule_->w_ratio(t);  // w_{t-1} / w_t
      const double pred = config_.prediction == PredictionWeight::kPrevious ? rho : 1.0;
      std::vector<double> ea(num_a_), eb(num_b_);
      for (int i = 0; i < num_a_; ++i)
        ea[i] = eta * (rho * sum_mu_[i] + pred * last_g_mu_[i]);
      for (int i = 0; i < num_b_; ++i)
        eb[i] = -eta * (rho * sum_nu_[i] + pred * last_g_nu_[i]);
      mu = softmax_policy(ea, config_.base_mu);
      nu = softmax_policy(eb, config_.base_nu);
      break;
    }
    case LearnerKind::kGda: {
      std::vector<double> xa(mu_prev_), xb(nu_prev_);
      for (int i = 0; i < num_a_; ++i) xa[i] += eta * last_g_mu_[i];
      for (int i = 0; i < num_b_; ++i) xb[i] -= eta * last_g_nu_[i];
      mu = project_simplex(xa);
      nu = project_simplex(xb);
      break;
    }
    case LearnerKind::kMatrixNe: {
      if (q_prev == nullptr) throw Error("MatrixNe learner needs the previous Q matrix");
      std::vector<double> qm(q_prev, q_prev + static_cast<std::size_t>(num_a_) * num_b_);
      MatrixNeSolution ne = matrix_ne(qm, num_a_, num_b_);
      mu = std::move(ne.row);
      nu = std::move(ne.col);
      break;
    }
    case LearnerKind::kHedge: {
      // Multiplicative weights unrolled: mu^t = base * exp(eta * sum g_i).
      std::vector<double> ea(num_a_), eb(num_b_);
      for (int i = 0; i < num_a_; ++i) ea[i] = eta * cum_mu_[i];
      for (int i = 0; i < num_b_; ++i) eb[i] = -eta * cum_nu_[i];
      mu = softmax_policy(ea, config_.base_mu);
      nu = softmax_policy(eb, config_.base_nu);
      break;
    }
  }
  mu_prev_ = mu;
  nu_prev_ = nu;
  return {std::move(mu), std::move(nu)};
}

void TwoPlayerLearner::observe(const std::vector<double>& g_mu,
                               const std::vector<double>& g_nu) {
  ++t_;
  if (config_.kind == LearnerKind::kFtrl || config_.kind == LearnerKind::kOftrl) {
    const double rho = 1.0 / schedule_->w_ratio(t_);  // w_{t-1} / w_t
    for (int i = 0; i < num_a_; ++i) sum_mu_[i] = rho * sum_mu_[i] + g_mu[i];
    for (int i = 0; i < num_b_; ++i) sum_nu_[i] = rho * sum_nu_[i] + g_nu[i];
  }
  if (config_.kind == LearnerKind::kHedge) {
    for (int i = 0; i < num_a_; ++i) cum_mu_[i] += g_mu[i];
    for (int i = 0; i < num_b_; ++i) cum_nu_[i] += g_nu[i];
  }
  last_g_mu_ = g_mu;
  last_g_nu_ = g_nu;
}

// ---------------------------------------------------------------------------
// RegretAccumulator

RegretAccumulator::RegretAccumulator(int num_a, int num_b,
                                     const Schedule& schedule, bool keep_history,
                                     int history_cap)
    : schedule_(&schedule),
      loss_mu_(num_a, 0.0),
      loss_nu_(num_b, 0.0),
      keep_history_(keep_history),
      history_cap_(history_cap) {}

void RegretAccumulator::observe(const std::vector<double>& g_mu,
                                const std::vector<double>& g_nu,
                                const std::vector<double>& mu,
                                const std::vector<double>& nu) {
  ++t_;
  const double b = schedule_->beta(t_);
  double dot_mu = 0.0, dot_nu = 0.0;
  for (std::size_t i = 0; i < g_mu.size(); ++i) {
    loss_mu_[i] = (1.0 - b) * loss_mu_[i] + b * g_mu[i];
    dot_mu += mu[i] * g_mu[i];
  }
  for (std::size_t i = 0; i < g_nu.size(); ++i) {
    loss_nu_[i] = (1.0 - b) * loss_nu_[i] + b * g_nu[i];
    dot_nu += nu[i] * g_nu[i];
  }
  pay_mu_ = (1.0 - b) * pay_mu_ + b * dot_mu;
  pay_nu_ = (1.0 - b) * pay_nu_ + b * dot_nu;
  if (keep_history_ && static_cast<int>(history_.size()) < history_cap_)
    history_.push_back({g_mu, g_nu, mu, nu});
}

double RegretAccumulator::max_player_regret() const {
  if (t_ == 0) throw Error("regret query before any step");
  return *std::max_element(loss_mu_.begin(), loss_mu_.end()) - pay_mu_;
}

double RegretAccumulator::min_player_regret() const {
  if (t_ == 0) throw Error("regret query before any step");
  return pay_nu_ - *std::min_element(loss_nu_.begin(), loss_nu_.end());
}

double RegretAccumulator::max_player_regret_bruteforce() const {
  if (!keep_history_ || static_cast<long>(history_.size()) != t_)
    throw Error("brute-force regret needs full history");
  const std::vector<double> betas = weight_vector(*schedule_, t_).weights();
  std::vector<double> total(loss_mu_.size(), 0.0);
  double pay = 0.0;
  for (long i = 0; i < t_; ++i) {
    for (std::size_t a = 0; a < total.size(); ++a)
      total[a] += betas[i] * history_[i].g_mu[a];
    double dot = 0.0;
    for (std::size_t a = 0; a < total.size(); ++a)
      dot += history_[i].mu[a] * history_[i].g_mu[a];
    pay += betas[i] * dot;
  }
  return *std::max_element(total.begin(), total.end()) - pay;
}

double RegretAccumulator::min_player_regret_bruteforce() const {
  if (!keep_history_ || static_cast<long>(history_.size()) != t_)
    throw Error("brute-force regret needs full history");
  const std::vector<double> betas = weight_vector(*schedule_, t_).weights();
  std::vector<double> total(loss_nu_.size(), 0.0);
  double pay = 0.0;
  for (long i = 0; i < t_; ++i) {
    for (std::size_t b = 0; b < total.size(); ++b)
      total[b] += betas[i] * history_[i].g_nu[b];
    double dot = 0.0;
    for (std::size_t b = 0; b < total.size(); ++b)
      dot += history_[i].nu[b] * history_[i].g_nu[b];
    pay += betas[i] * dot;
  }
  return pay - *std::min_element(total.begin(), total.end());
}

double weighted_regret(const RegretAccumulator& acc, int player) {
  return player == 0 ? acc.max_player_regret() : acc.min_player_regret();
}

}  // namespace mg
