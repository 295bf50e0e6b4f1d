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

// Continuous-time algebraic Riccati equation
//
//   A^T P + P A - P B R^{-1} B^T P + Q = 0
//
// and its differential counterpart. The stabilizing solution is computed by
// Kleinman-Newton iteration. When no stabilizing warm start is available the
// initial gain comes from integrating the differential Riccati equation
// forward from P(0) = Q until A - B R^{-1} B^T P becomes Hurwitz.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mrarl/error.hpp"
#include "mrarl/integrator.hpp"
#include "mrarl/matlin.hpp"

namespace mrarl {

/// Quadratic cost weights with the inverse of R and B R^{-1} B^T cached.
class LqrCost {
 public:
  LqrCost() = default;
  LqrCost(const Mat& b, const Mat& q, const Mat& r) : b_(b), q_(q), r_(r) {
    const int n = static_cast<int>(b.rows());
    const int m = static_cast<int>(b.cols());
    if (q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m) {
      throw Error(ErrorCode::kInvalidArgument, "LqrCost: Q must be n x n and R m x m");
    }
    if (!is_symmetric(r) || min_eigenvalue(r) <= 1e-12) {
      throw Error(ErrorCode::kRNotInvertible, "R must be symmetric positive definite (lambda_min > 1e-12)");
    }
    r_inv_ = symmetrize(Mat(r.inverse()));
    r_inv_bt_ = r_inv_ * b.transpose();
    s_ = symmetrize(b * r_inv_bt_);
  }

  const Mat& b() const { return b_; }
  const Mat& q() const { return q_; }
  const Mat& r() const { return r_; }
  const Mat& r_inv() const { return r_inv_; }
  /// R^{-1} B^T, so that the LQR gain is -r_inv_bt() * P.
  const Mat& r_inv_bt() const { return r_inv_bt_; }
  /// B R^{-1} B^T.
  const Mat& s() const { return s_; }

  Mat gain(const Mat& p) const { return -r_inv_bt_ * p; }

 private:
  Mat b_, q_, r_, r_inv_, r_inv_bt_, s_;
};

inline Mat care_residual_matrix(const Mat& p, const Mat& a, const LqrCost& cost) {
  const Mat ps = p * cost.s();
  return a.transpose() * p + p * a - symmetrize(ps * p) + cost.q();
}

inline double care_residual(const Mat& p, const Mat& a, const LqrCost& cost) {
  return care_residual_matrix(p, a, cost).norm();
}

inline double care_residual(const Mat& p, const Mat& a, const Mat& b, const Mat& q, const Mat& r) {
  return care_residual(p, a, LqrCost(b, q, r));
}

/// Time derivative of the value-iteration flow g * R(P, A). The quadratic
/// term is explicitly symmetrized so the output is exactly symmetric.
inline Mat dre_flow(const Mat& p, const Mat& a, const LqrCost& cost, double g) {
  const Mat ap = a.transpose() * p;
  const Mat ps = p * cost.s();
  return g * (symmetrize(ap + ap.transpose()) - symmetrize(ps * p) + cost.q());
}

inline Mat dre_flow(const Mat& p, const Mat& a, const Mat& b, const Mat& q, const Mat& r, double g) {
  return dre_flow(p, a, LqrCost(b, q, r), g);
}

struct CarSolution {
  Mat p;
  Mat k;  // -R^{-1} B^T P
  double residual = 0.0;
  int iterations = 0;
  bool bootstrapped = false;        // initial gain came from DRE integration
  std::vector<double> residual_history;  // CARE residual of each Kleinman iterate
};

struct CareOptions {
  double tol = 1e-9;  // relative to the size of the CARE terms, see care_scale

  int max_iterations = 60;
  std::optional<Mat> warm_start;
  long bootstrap_max_steps = 2'000'000;
};

namespace detail {

/// Magnitude of the terms summed in the CARE residual, floored at 1 so small
/// problems keep an absolute tolerance.
inline double care_scale(const Mat& p, const Mat& a, const LqrCost& cost) {
  return std::max(1.0, cost.q().norm() + 2.0 * a.norm() * p.norm() + cost.s().norm() * p.squaredNorm());
}


// DRE from P(0) = Q with the step rule h = 0.5 / (1 + |A| + |B|^2 |P| / lambda_min(R)).
inline Mat bootstrap_stabilizing(const Mat& a, const LqrCost& cost, long max_steps) {
  Mat p = cost.q();
  const double a_norm = a.norm();
  const double b_norm2 = cost.b().squaredNorm();
  const double r_min = min_eigenvalue(cost.r());
  for (long step = 0; step <= max_steps; ++step) {
    if (is_hurwitz(a - cost.s() * p)) return p;
    const double h = 0.5 / (1.0 + a_norm + b_norm2 * p.norm() / r_min);
    p = symmetrize(rk4_step([&](double, const Mat& y) { return dre_flow(y, a, cost, 1.0); }, 0.0, p, h));
    if (!p.allFinite()) break;
  }
  throw Error(ErrorCode::kNotStabilizable,
              "DRE bootstrap did not produce a stabilizing gain within the step budget");
}

}  // namespace detail

inline CarSolution solve_care(const Mat& a, const LqrCost& cost, const CareOptions& opts = {}) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || cost.b().rows() != n) throw Error(ErrorCode::kInvalidArgument, "solve_care: shape mismatch");
  CarSolution sol;
  Mat k;
  bool have_gain = false;
  if (opts.warm_start && opts.warm_start->rows() == n && opts.warm_start->allFinite()) {
    k = cost.gain(*opts.warm_start);
    have_gain = is_hurwitz(a + cost.b() * k);
  }
  if (!have_gain) {
    k = cost.gain(detail::bootstrap_stabilizing(a, cost, opts.bootstrap_max_steps));
    sol.bootstrapped = true;
  }
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Mat acl = a + cost.b() * k;
    const Mat p = solve_lyapunov(acl, cost.q() + k.transpose() * cost.r() * k);
    k = cost.gain(p);
    sol.p = p;
    sol.k = k;
    sol.iterations = it;
    sol.residual = care_residual(p, a, cost);
    sol.residual_history.push_back(sol.residual);
    if (sol.residual <= opts.tol * detail::care_scale(p, a, cost)) {
      // Newton is quadratic here, so one more step reaches the rounding floor.
      const Mat acl_next = a + cost.b() * k;
      if (!is_hurwitz(acl_next)) return sol;
      const Mat p_next = solve_lyapunov(acl_next, cost.q() + k.transpose() * cost.r() * k);
      const double r_next = care_residual(p_next, a, cost);
      if (r_next < sol.residual) {
        sol.p = p_next;
        sol.k = cost.gain(p_next);
        sol.residual = r_next;
        sol.residual_history.push_back(r_next);
        ++sol.iterations;
      }
      return sol;
    }
  }
  throw Error(ErrorCode::kNoConvergence, "Kleinman iteration stalled at residual " + std::to_string(sol.residual));
}

inline CarSolution solve_care(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const CareOptions& opts = {}) {
  return solve_care(a, LqrCost(b, q, r), opts);
}

// ---------------------------------------------------------------------------
// Sampling validator for the uncertainty set Theta = C ∩ (A0 + Image(B)).

struct ThetaSpec {
  Mat center;  // A0, center of the Frobenius ball C
  double radius = 0.0;
  Mat b, q, r;
};

enum class SampleKind { kCenter, kInterior, kBoundary };

inline std::string_view to_string(SampleKind k) {
  switch (k) {
    case SampleKind::kCenter: return "center";
    case SampleKind::kInterior: return "interior";
    case SampleKind::kBoundary: return "boundary";
  }
  return "?";
}

struct SampleCheck {
  SampleKind kind = SampleKind::kCenter;
  Mat a_hat;
  bool controllable = false;
  bool observable = false;
  bool care_solved = false;
  bool positive_definite = false;
  std::string detail;

  bool passed() const { return controllable && observable && care_solved && positive_definite; }
};

struct SamplerReport {
  std::vector<SampleCheck> samples;

  bool all_passed() const {
    for (const auto& s : samples)
      if (!s.passed()) return false;
    return true;
  }
  int failures() const {
    int f = 0;
    for (const auto& s : samples) f += s.passed() ? 0 : 1;
    return f;
  }
};

inline SampleCheck check_theta_point(const Mat& a_hat, const LqrCost& cost, const Mat& sqrt_q, SampleKind kind) {
  const int n = static_cast<int>(a_hat.rows());
  SampleCheck c;
  c.kind = kind;
  c.a_hat = a_hat;
  c.controllable = ctrb_rank(a_hat, cost.b()) == n;
  c.observable = obsv_rank(sqrt_q, a_hat) == n;
  if (!c.controllable) c.detail += "(A_hat, B) not controllable; ";
  if (!c.observable) c.detail += "(sqrt(Q), A_hat) not observable; ";
  try {
    const CarSolution sol = solve_care(a_hat, cost);
    c.care_solved = true;
    const double lmin = min_eigenvalue(sol.p);
    c.positive_definite = lmin > 0.0;
    if (!c.positive_definite) c.detail += "P(A_hat) not positive definite; ";
  } catch (const Error& e) {
    c.detail += std::string("CARE failed: ") + e.what() + "; ";
  }
  return c;
}

/// Checks the center, `samples` random interior points and `samples` random
/// boundary points of Theta. Directions are drawn in Image(B) so every point
/// stays in A0 + Image(B).
inline SamplerReport care_map_sampler(const ThetaSpec& spec, int samples, unsigned seed = 1) {
  const LqrCost cost(spec.b, spec.q, spec.r);
  const Mat sqrt_q = sym_sqrt(spec.q);
  const int n = static_cast<int>(spec.center.rows());
  const Mat bbp = spec.b * pinv(spec.b).pinv;
  SamplerReport report;
  report.samples.push_back(check_theta_point(spec.center, cost, sqrt_q, SampleKind::kCenter));
  if (spec.radius <= 0.0) return report;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto direction = [&]() -> Mat {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Mat g(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
      const Mat d = bbp * g;
      if (d.norm() > 1e-12) return d / d.norm();
    }
    return Mat::Zero(n, n);
  };
  for (int s = 0; s < samples; ++s) {
    const Mat dir = direction();
    report.samples.push_back(
        check_theta_point(spec.center + spec.radius * unit(rng) * dir, cost, sqrt_q, SampleKind::kInterior));
  }
  for (int s = 0; s < samples; ++s) {
    const Mat dir = direction();
    report.samples.push_back(check_theta_point(spec.center + spec.radius * dir, cost, sqrt_q, SampleKind::kBoundary));
  }
  return report;
}

}  // namespace mrarl
