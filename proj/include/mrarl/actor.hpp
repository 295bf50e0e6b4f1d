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

// Actor: reference model driven by the current value estimate, and the
// model-reference adaptive gain that makes the plant track it.

#pragma once

#include "mrarl/critic.hpp"
#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"
#include "mrarl/riccati.hpp"

namespace mrarl {

struct ActorState {
  Vec xm;
  Mat k_a;  // m x n
};

/// x_m' = (A_hat - B R^{-1} B^T P_hat) x_m + B d
inline Vec refmodel_flow(const Vec& xm, const Mat& a_hat, const Mat& p_hat, const LqrCost& cost, const Vec& d) {
  return a_hat * xm - cost.s() * (p_hat * xm) + cost.b() * d;
}

/// K_a' = -mu B^T P_hat (x - x_m) x^T + B^+ A_hat'. The second term cancels
/// the drift of the matching gain B^+ (A_hat - A) while A_hat moves.
inline Mat adaptive_flow(const Mat& p_hat, const Vec& x, const Vec& xm, const Mat& a_hat_dot, const InputMap& input,
                         double mu) {
  return -mu * (input.b().transpose() * (p_hat * (x - xm))) * x.transpose() + input.b_pinv() * a_hat_dot;
}

/// u = -R^{-1} B^T P_hat x + K_a x + d
inline Vec control_law(const Vec& x, const Mat& p_hat, const Mat& k_a, const Vec& d, const LqrCost& cost) {
  return -cost.r_inv_bt() * (p_hat * x) + k_a * x + d;
}

/// Feedback gain actually applied to the plant, -R^{-1} B^T P_hat + K_a.
inline Mat applied_gain(const Mat& p_hat, const Mat& k_a, const LqrCost& cost) { return cost.gain(p_hat) + k_a; }

/// K_a(A_hat) = B^+ (A_hat - A), the gain that cancels the model mismatch.
/// Requires the true A, so it is a test/metric oracle only.
inline Mat matching_gain_oracle(const Mat& a_hat, const Mat& a_true, const InputMap& input, double tol = 1e-8) {
  const double res = input.subspace_residual(a_hat, a_true);
  if (res > tol * (1.0 + (a_hat - a_true).norm())) {
    throw Error(ErrorCode::kMatchingViolation, "A_hat - A is not in Image(B) (residual " + std::to_string(res) + ")");
  }
  return input.b_pinv() * (a_hat - a_true);
}

/// Tracking Lyapunov function e^T P_hat e + |K_tilde|_F^2 / mu.
inline double ve_monitor(const Vec& e, const Mat& k_tilde, const Mat& p_hat, double mu) {
  return e.dot(p_hat * e) + k_tilde.squaredNorm() / mu;
}

/// Reference-model Lyapunov function x_m^T P_hat x_m.
inline double vm_monitor(const Vec& xm, const Mat& p_hat) { return xm.dot(p_hat * xm); }

}  // namespace mrarl
