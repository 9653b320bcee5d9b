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

#ifndef MG_SCHEDULE_HPP_
#define MG_SCHEDULE_HPP_

#include <string>
#include <vector>

#include "mg/error.hpp"

namespace mg {

// Learning-rate sequence for the value update. Kinds:
//   Alpha: beta_t = (H+1)/(H+t), the smooth schedule.
//   Eager: beta_t = 1, full re-evaluation each iteration.
//   Custom: explicit list, beta_1 must be 1 and all entries in [0,1].
// Immutable after construction; safe to share across threads.
class Schedule {
 public:
  enum class Kind { kAlpha, kEager, kCustom };

  static Schedule Alpha(int horizon);
  static Schedule Eager();
  static Schedule Custom(std::vector<double> betas);

  Kind kind() const { return kind_; }
  int horizon() const { return horizon_; }

  // beta_t for step t >= 1. Custom kind throws if t exceeds the list.
  double beta(long t) const;

  // w_t = alpha_t^t / alpha_t^1, with w_0 = 1. Alpha kind only.
  double w(long t) const;
  // w_t / w_{t-1}; equals (H+t-1)/(t-1) for t >= 2, 1 for t <= 1.
  double w_ratio(long t) const;

  // sup_j sum_{t>=j} beta_t^j. 1+1/H for Alpha, 1 for Eager;
  // not computable in closed form for Custom (throws).
  double c_beta() const;

  // Partial sum  sum_{t=j}^{N} beta_t^j.
  double tail_sum(long j, long N) const;

 private:
  Schedule(Kind kind, int horizon, std::vector<double> betas)
      : kind_(kind), horizon_(horizon), custom_(std::move(betas)) {}

  Kind kind_;
  int horizon_ = 0;
  std::vector<double> custom_;
};

// The weights beta_t^1..beta_t^t (summing to one) of the running average
// induced by a schedule, maintained incrementally: advancing from t-1 to t
// scales all previous weights by (1-beta_t) and appends beta_t. The scale
// factor is kept lazily so each advance is O(1) amortized.
class WeightVector {
 public:
  explicit WeightVector(const Schedule& schedule) : schedule_(&schedule) {}

  long t() const { return t_; }
  void advance();                 // move from step t to t+1
  void advance_to(long t);        // advance until t() == t
  double weight(long i) const;    // beta_t^i, 1 <= i <= t
  std::vector<double> weights() const;

 private:
  void renormalize();

  const Schedule* schedule_;
  long t_ = 0;
  double scale_ = 1.0;
  std::vector<double> raw_;  // weight(i) == scale_ * raw_[i-1]
};

// Convenience wrapper matching the incremental construction above.
WeightVector weight_vector(const Schedule& schedule, long t);

}  // namespace mg

#endif  // MG_SCHEDULE_HPP_
