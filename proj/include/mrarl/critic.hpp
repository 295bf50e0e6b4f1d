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

// Critic: value-function identification.
//
// Swapping filters turn x' = A x + B u into the algebraic regression
//   A xi - (x + zeta) -> 0,
// the identifier runs a normalized gradient on eps = A_hat xi - (x + zeta)
// restricted to A0 + Image(B) and projected onto a Frobenius ball, and the
// value estimate P_hat follows the scaled differential Riccati equation at A_hat.

#pragma once

#include <algorithm>
#include <cmath>

#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"
#include "mrarl/riccati.hpp"

namespace mrarl {

/// B together with its pseudo-inverse and the projector B B^+ onto Image(B).
class InputMap {
 public:
  InputMap() = default;
  explicit InputMap(const Mat& b) : b_(b) {
    const PinvResult p = pinv(b);
    b_pinv_ = p.pinv;
    rank_ = p.rank;
    projector_ = b_ * b_pinv_;
    complement_ = Mat::Identity(b.rows(), b.rows()) - projector_;
  }
  const Mat& b() const { return b_; }
  const Mat& b_pinv() const { return b_pinv_; }
  const Mat& projector() const { return projector_; }
  /// I - B B^+
  const Mat& complement() const { return complement_; }
  int rank() const { return rank_; }

  /// |(I - B B^+) (M - M0)|_F, zero iff M lies in M0 + Image(B).
  double subspace_residual(const Mat& m, const Mat& m0) const { return (complement_ * (m - m0)).norm(); }

 private:
  Mat b_, b_pinv_, projector_, complement_;
  int rank_ = 0;
};

/// The Frobenius ball C = { |A_hat - center|_F <= radius }.
struct UncertaintySpec {
  Mat center;
  double radius = 1.0;
  double boundary_layer = 0.01;  // projection boundary-layer width

  static UncertaintySpec ball(const Mat& center, double radius) { return {center, radius, radius / 100.0}; }

  void validate() const {
    if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "uncertainty radius must be positive");
    if (!(boundary_layer > 0.0) || boundary_layer > radius) {
      throw Error(ErrorCode::kInvalidArgument, "projection boundary layer must lie in (0, radius]");
    }
  }
  double distance(const Mat& a) const { return (a - center).norm(); }
};

struct CriticState {
  Vec xi;
  Vec zeta;
  Mat a_hat;
  Mat p_hat;
};

struct SwapRates {
  Vec xi_dot;
  Vec zeta_dot;
};

inline SwapRates swap_flow(const Vec& xi, const Vec& zeta, const Vec& x, const Vec& u, const Mat& b, double lambda) {
  return {-lambda * xi + x, -lambda * (x + zeta) - b * u};
}

inline Vec prediction_error(const Mat& a_hat, const Vec& xi, const Vec& x, const Vec& zeta) {
  return a_hat * xi - (x + zeta);
}

/// Lipschitz projection of an update direction onto the ball: inside the
/// inner radius (radius - boundary_layer) or for inward directions the
/// direction passes unchanged; across the layer the outward radial component
/// is removed progressively, fully at and beyond the boundary.
inline Mat proj_ball(const Mat& a_hat, const Mat& direction, const UncertaintySpec& spec) {
  const Mat normal = a_hat - spec.center;
  const double n2 = normal.squaredNorm();
  const double inner = spec.radius - spec.boundary_layer;
  const double scale = (n2 - inner * inner) / (spec.radius * spec.radius - inner * inner);
  if (scale <= 0.0) return direction;
  const double outward = (normal.array() * direction.array()).sum();
  if (outward <= 0.0) return direction;
  return direction - (std::min(1.0, scale) * outward / n2) * normal;
}

/// Raw normalized gradient before projection, -gamma B B^+ eps xi^T / (1 + nu |xi||eps|).
inline Mat identifier_gradient(const Vec& eps, const Vec& xi, const InputMap& input, double gamma, double nu) {
  const double denom = 1.0 + nu * xi.norm() * eps.norm();
  return (-gamma / denom) * (input.projector() * (eps * xi.transpose()));
}

inline Mat identifier_flow(const CriticState& s, const Vec& x, const UncertaintySpec& spec, const InputMap& input,
                           double gamma, double nu) {
  const Vec eps = prediction_error(s.a_hat, s.xi, x, s.zeta);
  return proj_ball(s.a_hat, identifier_gradient(eps, s.xi, input, gamma, nu), spec);
}

/// Upper bound gamma |xi||eps| / (1 + nu |xi||eps|) on |A_hat'|_F.
inline double identifier_rate_bound(const Vec& eps, const Vec& xi, double gamma, double nu) {
  const double r = xi.norm() * eps.norm();
  return gamma * r / (1.0 + nu * r);
}

inline Mat value_flow(const CriticState& s, const LqrCost& cost, double g) { return dre_flow(s.p_hat, s.a_hat, cost, g); }

/// Identifier Lyapunov function |eps_tilde|^2 / lambda + |A_tilde|_F^2 / (2 gamma).
/// Needs the true A; used only by tests and trajectory metrics.
inline double va_monitor(const Vec& eps_tilde, const Mat& a_tilde, double lambda, double gamma) {
  return eps_tilde.squaredNorm() / lambda + a_tilde.squaredNorm() / (2.0 * gamma);
}

/// eps_tilde = A xi - (x + zeta), the part of eps not explained by A_hat - A.
inline Vec eps_tilde(const Mat& a_true, const Vec& xi, const Vec& x, const Vec& zeta) {
  return a_true * xi - (x + zeta);
}

}  // namespace mrarl
