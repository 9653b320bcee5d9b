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

#include "mg/schedule.hpp"

#include <cmath>

namespace mg {

Schedule Schedule::Alpha(int horizon) {
  if (horizon < 1) throw Error("Alpha schedule requires horizon >= 1");
  return Schedule(Kind::kAlpha, horizon, {});
}

Schedule Schedule::Eager() { return Schedule(Kind::kEager, 0, {}); }

Schedule Schedule::Custom(std::vector<double> betas) {
  if (betas.empty() || betas[0] != 1.0)
    throw Error("Custom schedule requires beta_1 = 1");
  for (double b : betas)
    if (!(b >= 0.0 && b <= 1.0))
      throw Error("Custom schedule entries must lie in [0,1]");
  return Schedule(Kind::kCustom, 0, std::move(betas));
}

double Schedule::beta(long t) const {
  if (t < 1) throw Error("beta(t) requires t >= 1");
  switch (kind_) {
    case Kind::kAlpha:
      return static_cast<double>(horizon_ + 1) / static_cast<double>(horizon_ + t);
    case Kind::kEager:
      return 1.0;
    case Kind::kCustom:
      if (t > static_cast<long>(custom_.size()))
        throw Error("Custom schedule has no beta_" + std::to_string(t));
      return custom_[t - 1];
  }
  return 0.0;  // unreachable
}

double Schedule::w_ratio(long t) const {
  if (kind_ != Kind::kAlpha) throw Error("w is defined for the Alpha schedule only");
  if (t <= 1) return 1.0;
  return static_cast<double>(horizon_ + t - 1) / static_cast<double>(t - 1);
}

double Schedule::w(long t) const {
  if (kind_ != Kind::kAlpha) throw Error("w is defined for the Alpha schedule only");
  if (t < 0) throw Error("w(t) requires t >= 0");
  double value = 1.0;  // w_0 = w_1 = 1
  for (long i = 2; i <= t; ++i) value *= w_ratio(i);
  return value;
}

double Schedule::c_beta() const {
  switch (kind_) {
    case Kind::kAlpha:
      return 1.0 + 1.0 / static_cast<double>(horizon_);
    case Kind::kEager:
      return 1.0;
    case Kind::kCustom:
      throw Error("c_beta has no closed form for Custom schedules; use tail_sum");
  }
  return 0.0;  // unreachable
}

double Schedule::tail_sum(long j, long N) const {
  if (j < 1 || N < j) throw Error("tail_sum requires 1 <= j <= N");
  // beta_t^j = beta_j * prod_{u=j+1}^t (1 - beta_u), accumulated term by term.
  double term = beta(j);
  double sum = term;
  for (long t = j + 1; t <= N; ++t) {
    term *= 1.0 - beta(t);
    sum += term;
    if (term == 0.0) break;
  }
  return sum;
}

void WeightVector::advance() {
  ++t_;
  const double b = schedule_->beta(t_);
  if (b == 1.0) {
    raw_.assign(t_ - 1, 0.0);
    scale_ = 1.0;
    raw_.push_back(1.0);
    return;
  }
  scale_ *= 1.0 - b;
  if (scale_ < 1e-250) renormalize();
  raw_.push_back(b / scale_);
}

void WeightVector::advance_to(long t) {
  while (t_ < t) advance();
}

void WeightVector::renormalize() {
  for (double& r : raw_) r *= scale_;
  scale_ = 1.0;
}

double WeightVector::weight(long i) const {
  if (i < 1 || i > t_) throw Error("weight index out of range");
  return scale_ * raw_[i - 1];
}

std::vector<double> WeightVector::weights() const {
  std::vector<double> out(raw_);
  for (double& r : out) r *= scale_;
  return out;
}

WeightVector weight_vector(const Schedule& schedule, long t) {
  if (t < 1) throw Error("weight_vector requires t >= 1");
  WeightVector v(schedule);
  v.advance_to(t);
  return v;
}

}  // namespace mg
