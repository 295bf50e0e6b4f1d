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

// Reference computations used by the tests. Nothing here calls into the
// library under test: every oracle works on plain Eigen::MatrixXd and uses a
// different algorithm from the production code path it checks.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// CARE residual A^T P + P A - P B R^{-1} B^T P + Q, written out longhand.
inline MatrixXd riccati_residual(const MatrixXd& p, const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                                 const MatrixXd& r) {
  const MatrixXd s = b * r.llt().solve(b.transpose());
  return a.transpose() * p + p * a - p * s * p + q;
}

struct DreResult {
  MatrixXd p;
  double residual = 0.0;
  long steps = 0;
  bool converged = false;
};

/// Integrates P' = A^T P + P A - P S P + Q from P(0) = 0 with a fixed-step
/// RK4 until the residual drops below `tol` times the size of the summed
/// terms, which keeps the test above the rounding floor when |P| is large.
/// From zero the flow is monotone
/// and converges to the stabilizing solution for controllable pairs with
/// Q > 0. The step is bounded by the spectrum of the closed loop seen so far.
inline DreResult dre_long_horizon(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                                  double tol, long max_steps = 4'000'000) {
  const MatrixXd s = b * r.llt().solve(b.transpose());
  auto f = [&](const MatrixXd& p) -> MatrixXd {
    const MatrixXd d = a.transpose() * p + p * a - p * s * p + q;
    return 0.5 * (d + d.transpose());
  };
  DreResult out;
  out.p = MatrixXd::Zero(a.rows(), a.cols());
  for (long k = 0; k < max_steps; ++k) {
    const MatrixXd k1 = f(out.p);
    out.residual = k1.norm();
    const double pn = out.p.norm();
    const double scale = 1.0 + q.norm() + 2.0 * a.norm() * pn + s.norm() * pn * pn;
    if (out.residual < tol * scale) {
      out.converged = true;
      out.steps = k;
      return out;
    }
    // Linearized rate of the flow is bounded by 2|A - S P| + |S||P|.
    const double rate = 2.0 * (a - s * out.p).norm() + s.norm() * out.p.norm() + 1.0;
    const double h = 0.8 / rate;
    const MatrixXd k2 = f(out.p + 0.5 * h * k1);
    const MatrixXd k3 = f(out.p + 0.5 * h * k2);
    const MatrixXd k4 = f(out.p + h * k3);
    out.p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  out.steps = max_steps;
  return out;
}

/// Integral of e^{A^T t} Q e^{A t} over [0, inf) by composite Simpson on a
/// long horizon. The matrix exponential comes from Eigen's Pade scaling and
/// squaring, independent of the Kronecker solve under test.
inline MatrixXd lyapunov_quadrature(const MatrixXd& a, const MatrixXd& q) {
  const Eigen::EigenSolver<MatrixXd> es(a, false);
  double slowest = 1e300;
  double fastest = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    slowest = std::min(slowest, -es.eigenvalues()(i).real());
    fastest = std::max(fastest, std::abs(es.eigenvalues()(i)));
  }
  const double horizon = 40.0 / slowest;
  long intervals = static_cast<long>(std::ceil(horizon * std::max(fastest, 1.0) * 40.0));
  intervals = std::max<long>(intervals + (intervals % 2), 2000);
  const double h = horizon / static_cast<double>(intervals);
  const MatrixXd step = (a * h).exp();
  MatrixXd e = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd acc = MatrixXd::Zero(a.rows(), a.cols());
  for (long k = 0; k <= intervals; ++k) {
    const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * (e.transpose() * q * e);
    e = e * step;
  }
  return acc * (h / 3.0);
}

/// Characteristic polynomial (highest power first) by evaluating det(sI - A)
/// at n+1 nodes and solving the Vandermonde system.
inline VectorXd charpoly_by_interpolation(const MatrixXd& a) {
  const Eigen::Index n = a.rows();
  const double scale = std::max(1.0, a.norm());
  MatrixXd v(n + 1, n + 1);
  VectorXd rhs(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) {
    const double s = scale * std::cos(M_PI * (2.0 * i + 1.0) / (2.0 * (n + 1)));
    for (Eigen::Index j = 0; j <= n; ++j) v(i, j) = std::pow(s, static_cast<double>(n - j));
    rhs(i) = (s * MatrixXd::Identity(n, n) - a).determinant();
  }
  return v.fullPivLu().solve(rhs);
}

/// Roots of a monic-normalized polynomial via the eigenvalues of its
/// companion matrix (Hessenberg QR inside Eigen::EigenSolver).
inline std::vector<std::complex<double>> companion_roots(const VectorXd& coeffs) {
  const Eigen::Index n = coeffs.size() - 1;
  MatrixXd c = MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) c(0, j) = -coeffs(j + 1) / coeffs(0);
  for (Eigen::Index i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  const Eigen::EigenSolver<MatrixXd> es(c, false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

inline double max_real_part(const MatrixXd& a) {
  double m = -1e300;
  for (const auto& z : companion_roots(charpoly_by_interpolation(a))) m = std::max(m, z.real());
  return m;
}

inline int rank_by_lu(const MatrixXd& m, double rtol = 1e-8) {
  Eigen::FullPivLU<MatrixXd> lu(m);
  lu.setThreshold(rtol);
  return static_cast<int>(lu.rank());
}

inline MatrixXd ctrb_matrix(const MatrixXd& a, const MatrixXd& b) {
  const Eigen::Index n = a.rows();
  MatrixXd c(n, n * b.cols());
  MatrixXd blk = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    c.middleCols(k * b.cols(), b.cols()) = blk;
    blk = a * blk;
  }
  return c;
}

/// Smallest singular value of the controllability matrix relative to its
/// largest; used to reject nearly uncontrollable random draws.
inline double ctrb_conditioning(const MatrixXd& a, const MatrixXd& b) {
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(ctrb_matrix(a, b)).singularValues();
  return sv(sv.size() - 1) / sv(0);
}

struct RandomSystem {
  MatrixXd a, b;
};

/// Gaussian (A, B) with n in [1, max_n], m in [1, min(n, max_m)], accepted
/// only when the controllability matrix is comfortably full rank.
inline RandomSystem random_controllable(std::mt19937_64& rng, int max_n, int max_m) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick_n(1, max_n);
  for (;;) {
    const int n = pick_n(rng);
    std::uniform_int_distribution<int> pick_m(1, std::min(n, max_m));
    const int m = pick_m(rng);
    RandomSystem s{MatrixXd(n, n), MatrixXd(n, m)};
    for (Eigen::Index i = 0; i < s.a.size(); ++i) s.a.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < s.b.size(); ++i) s.b.data()[i] = g(rng);
    if (ctrb_conditioning(s.a, s.b) > 1e-3) return s;
  }
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Random Hurwitz matrix: a Gaussian draw shifted left past its spectral
/// abscissa by a random margin in [0.2, 2].
inline MatrixXd random_hurwitz(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> margin(0.2, 2.0);
  MatrixXd a = random_matrix(rng, n, n);
  const Eigen::EigenSolver<MatrixXd> es(a, false);
  double abscissa = -1e300;
  for (Eigen::Index i = 0; i < n; ++i) abscissa = std::max(abscissa, es.eigenvalues()(i).real());
  a -= (abscissa + margin(rng)) * MatrixXd::Identity(n, n);
  return a;
}

/// Least-squares slope of log(y) against t.
inline double log_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  return (n * sty - st * sy) / (n * stt - st * st);
}

}  // namespace oracle
