// Copyright 2026 The mrarl Authors
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

// Plants: generic LTI pairs and the doubly fed induction motor (DFIM) in a
// rotating dq frame, optionally with slow thermal and rotor-speed drift.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"

namespace mrarl {

struct LtiPlant {
  Mat a;
  Mat b;
};

inline Vec plant_flow(const Vec& x, const Vec& u, const LtiPlant& plant) { return plant.a * x + plant.b * u; }

/// Copper temperature coefficient of resistance, ohm per degree Celsius.
inline constexpr double kAlphaCopper = 4.041e-3;

struct DfimParams {
  double l1 = 0.0;  // stator self-inductance [H]
  double l2 = 0.0;  // rotor self-inductance [H]
  double lm = 0.0;  // mutual inductance [H]
  double r1 = 0.0;  // stator resistance [ohm]
  double r2 = 0.0;  // rotor resistance [ohm]
  double omega0 = 0.0;  // reference frame speed [rad/s]
  double omegar = 0.0;  // rotor electrical speed [rad/s]
  double pole_pairs = 0.0;  // carried for completeness, unused by the model

  double l_bar() const { return l1 * l2 - lm * lm; }
};

/// State (i1u, i1v, i2u, i2v), input (u1u, u1v, u2u, u2v).
inline LtiPlant dfim_matrices(const DfimParams& p) {
  const double lb = p.l_bar();
  if (!(lb > 0.0)) throw Error(ErrorCode::kDegenerateInductance, "L1*L2 - Lm^2 must be positive");
  const double alpha = lb * p.omega0;
  const double beta = p.lm * p.lm * p.omegar;
  const double beta12 = p.l1 * p.l2 * p.omegar;
  const double beta1 = p.l1 * p.lm * p.omegar;
  const double beta2 = p.l2 * p.lm * p.omegar;
  Mat a(4, 4);
  a << -p.l2 * p.r1, -alpha + beta, p.lm * p.r2, beta2,
       alpha - beta, -p.l2 * p.r1, -beta2, -p.lm * p.r2,
       p.lm * p.r1, -beta1, -p.l1 * p.r2, -alpha - beta12,
       beta1, p.lm * p.r1, alpha + beta12, -p.l1 * p.r2;
  Mat b(4, 4);
  b << p.l2, 0.0, -p.lm, 0.0,
       0.0, p.l2, 0.0, -p.lm,
       -p.lm, 0.0, p.l1, 0.0,
       0.0, -p.lm, 0.0, p.l1;
  return {a / lb, b / lb};
}

inline double resistance_at(double r_base, double delta_temp, double alpha) { return r_base + alpha * delta_temp; }

/// One logistic ramp 0 -> total whose 5%..95% transition spans `duration`
/// seconds and is centered at `center`.
struct LogisticRamp {
  double total = 0.0;
  double duration = 1.0;
  double center = 0.0;

  double rate() const { return std::log(361.0) / duration; }
  double operator()(double t) const { return total / (1.0 + std::exp(-rate() * (t - center))); }
  /// Time after which the ramp is past 95% of its total.
  double settle_time() const { return center + 0.5 * duration; }
  double onset_time() const { return center - 0.5 * duration; }
};

struct DriftSchedule {
  LogisticRamp temperature{80.0, 600.0, 400.0};                  // degC
  LogisticRamp speed{2.0 * M_PI * 20.0, 60.0, 300.0};            // rad/s
  double alpha = kAlphaCopper;                                   // ohm / degC

  void validate() const {
    if (!(temperature.duration > 0.0) || !(speed.duration > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "drift durations must be positive");
    }
  }
  double settle_time() const { return std::max(temperature.settle_time(), speed.settle_time()); }
  double onset_time() const { return std::min(temperature.onset_time(), speed.onset_time()); }
};

struct DriftValue {
  double delta_temp = 0.0;
  double delta_omegar = 0.0;
};

inline DriftValue schedule_eval(const DriftSchedule& s, double t) { return {s.temperature(t), s.speed(t)}; }

/// Applies the drift at time t: both windings share the copper coefficient
/// and only the rotor speed moves.
inline DfimParams drifted_params(const DfimParams& base, const DriftSchedule& s, double t) {
  const DriftValue v = schedule_eval(s, t);
  DfimParams p = base;
  p.r1 = resistance_at(base.r1, v.delta_temp, s.alpha);
  p.r2 = resistance_at(base.r2, v.delta_temp, s.alpha);
  p.omegar = base.omegar + v.delta_omegar;
  return p;
}

/// The true system: fixed LTI, or a DFIM whose parameters follow a drift
/// schedule. B never drifts.
class PlantModel {
 public:
  PlantModel() = default;

  static PlantModel lti(LtiPlant p) {
    if (p.a.rows() != p.a.cols() || p.b.rows() != p.a.rows()) {
      throw Error(ErrorCode::kInvalidArgument, "plant: A must be n x n and B n x m");
    }
    if (!p.a.allFinite() || !p.b.allFinite()) throw Error(ErrorCode::kInvalidArgument, "plant: non-finite entries");
    PlantModel m;
    m.nominal_ = std::move(p);
    return m;
  }

  static PlantModel dfim(const DfimParams& params, std::optional<DriftSchedule> drift = std::nullopt) {
    if (drift) drift->validate();
    PlantModel m = lti(dfim_matrices(params));
    m.dfim_ = params;
    m.drift_ = drift;
    return m;
  }

  int n() const { return static_cast<int>(nominal_.a.rows()); }
  int m() const { return static_cast<int>(nominal_.b.cols()); }
  const Mat& b() const { return nominal_.b; }
  bool time_varying() const { return drift_.has_value(); }
  const std::optional<DfimParams>& dfim_params() const { return dfim_; }
  const std::optional<DriftSchedule>& drift() const { return drift_; }

  std::optional<DfimParams> params_at(double t) const {
    if (!dfim_) return std::nullopt;
    if (!drift_) return dfim_;
    return drifted_params(*dfim_, *drift_, t);
  }

  /// Frozen-time A(t).
  Mat a_at(double t) const {
    if (!drift_) return nominal_.a;
    return dfim_matrices(drifted_params(*dfim_, *drift_, t)).a;
  }

  LtiPlant at(double t) const { return {a_at(t), nominal_.b}; }

 private:
  LtiPlant nominal_;
  std::optional<DfimParams> dfim_;
  std::optional<DriftSchedule> drift_;
};

}  // namespace mrarl
