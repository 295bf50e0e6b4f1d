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

// Dense small-matrix linear algebra. Everything here is a pure function.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mrarl/error.hpp"

namespace mrarl {

/// Largest state/input dimension supported by the stack-allocated carriers.
inline constexpr int kMaxDim = 8;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kDefaultRankTol = 1e-8;

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

/// Builds a matrix from row-major entries, rejecting size mismatches and
/// non-finite values.
inline Mat make_matrix(int rows, int cols, std::span<const double> row_major) {
  if (rows < 0 || cols < 0 || rows > kMaxDim || cols > kMaxDim) {
    throw Error(ErrorCode::kInvalidArgument,
                "matrix shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " outside supported range (max " + std::to_string(kMaxDim) + ")");
  }
  if (row_major.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw Error(ErrorCode::kInvalidArgument, "entry count does not match rows*cols");
  }
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = row_major[static_cast<std::size_t>(i * cols + j)];
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite matrix entry");
      m(i, j) = v;
    }
  }
  return m;
}

inline Mat identity(int n) { return Mat::Identity(n, n); }

inline double fro(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.norm(); }

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Mat& m) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm());
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi rotations).

struct SymEigen {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
};

inline SymEigen symmetric_eigen(const Mat& s_in) {
  const int n = static_cast<int>(s_in.rows());
  if (s_in.cols() != n) throw Error(ErrorCode::kInvalidArgument, "symmetric_eigen needs a square matrix");
  Mat a = symmetrize(s_in);
  Mat v = Mat::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int l, int r) { return a(l, l) < a(r, r); });
  SymEigen out{Vec(n), Mat(n, n)};
  for (int i = 0; i < n; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

inline double min_eigenvalue(const Mat& s) {
  if (s.rows() == 0) return 0.0;
  return symmetric_eigen(s).values(0);
}

/// Principal square root of a symmetric PSD matrix.
inline Mat sym_sqrt(const Mat& q) {
  const SymEigen eig = symmetric_eigen(q);
  const int n = static_cast<int>(q.rows());
  Vec roots(n);
  for (int i = 0; i < n; ++i) {
    const double lam = eig.values(i);
    if (lam < -1e-10) {
      throw Error(ErrorCode::kNotPsd, "sym_sqrt: eigenvalue " + std::to_string(lam) + " < -1e-10");
    }
    roots(i) = std::sqrt(std::max(lam, 0.0));
  }
  return symmetrize(eig.vectors * roots.asDiagonal() * eig.vectors.transpose());
}

// ---------------------------------------------------------------------------
// Pseudo-inverse and rank.

struct PinvResult {
  Mat pinv;
  int rank = 0;
};

inline Eigen::VectorXd singular_values(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.size() == 0) return {};
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

inline int numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& m, double rtol = kDefaultRankTol) {
  const Eigen::VectorXd sv = singular_values(m);
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rtol * sv(0)) ++r;
  return r;
}

/// Moore-Penrose pseudo-inverse via SVD; singular values at or below
/// rtol * sigma_max are treated as zero.
inline PinvResult pinv(const Mat& m, double rtol = kDefaultRankTol) {
  if (m.size() == 0) throw Error(ErrorCode::kInvalidArgument, "pinv of empty matrix");
  const Eigen::MatrixXd md = m;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(md, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(0) > 0.0 && sv(i) > rtol * sv(0)) {
      inv(i) = 1.0 / sv(i);
      ++rank;
    }
  }
  const Eigen::MatrixXd p = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return {Mat(p), rank};
}

/// Square well-conditioned shortcut. Callers are expected to cross-check
/// against pinv() when conditioning is in doubt.
inline Mat pinv_lu(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "pinv_lu needs a non-empty square matrix");
  }
  const Eigen::MatrixXd md = m;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(md);
  if (!(lu.rcond() > 1e-12)) throw Error(ErrorCode::kSingularSystem, "pinv_lu: matrix is singular");
  return Mat(lu.inverse());
}

// ---------------------------------------------------------------------------
// Lyapunov equation A^T P + P A + Q = 0.

inline Mat solve_lyapunov(const Mat& a, const Mat& q) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument, "solve_lyapunov: shape mismatch");
  }
  const int nn = n * n;
  // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P), column-major vec.
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nn, nn);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int row = j * n + i;  // entry (i, j)
      for (int l = 0; l < n; ++l) {
        k(row, j * n + l) += a(l, i);  // (A^T P)_{ij} = sum_l A_{li} P_{lj}
        k(row, l * n + i) += a(l, j);  // (P A)_{ij}   = sum_l P_{il} A_{lj}
      }
    }
  }
  Eigen::VectorXd rhs(nn);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs(j * n + i) = -q(i, j);
  // Full pivoting exposes an eigenvalue pair summing to zero as a tiny pivot.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kSingularSystem, "solve_lyapunov: vectorized system is rank-deficient");
  }
  const Eigen::VectorXd p = lu.solve(rhs);
  if (!p.allFinite()) throw Error(ErrorCode::kSingularSystem, "solve_lyapunov: non-finite solution");
  Mat out(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = p(j * n + i);
  return symmetrize(out);
}

// ---------------------------------------------------------------------------
// Hurwitz test: Faddeev-LeVerrier characteristic polynomial + Routh array.

/// Coefficients of det(sI - A), highest power first (leading 1).
inline std::vector<double> characteristic_polynomial(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> c(static_cast<std::size_t>(n + 1), 0.0);
  c[0] = 1.0;
  Mat m = Mat::Zero(n, n);
  const Mat eye = Mat::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    m = a * m + c[static_cast<std::size_t>(k - 1)] * eye;
    c[static_cast<std::size_t>(k)] = -(a * m).trace() / k;
  }
  return c;
}

/// Routh criterion for a real polynomial (highest power first). Returns true
/// iff every root lies strictly in the open left half-plane.
inline bool routh_stable(const std::vector<double>& coeffs) {
  std::vector<double> p = coeffs;
  while (!p.empty() && p.front() == 0.0) p.erase(p.begin());
  if (p.empty()) return false;
  if (p.front() < 0.0)
    for (double& v : p) v = -v;
  const std::size_t deg = p.size() - 1;
  if (deg == 0) return true;
  double scale = 0.0;
  for (double v : p) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-13 * scale;
  for (double v : p)
    if (!(v > tiny)) return false;
  const std::size_t width = deg / 2 + 1;
  std::vector<double> prev(width, 0.0);
  std::vector<double> cur(width, 0.0);
  for (std::size_t i = 0; i <= deg; i += 2) prev[i / 2] = p[i];
  for (std::size_t i = 1; i <= deg; i += 2) cur[i / 2] = p[i];
  for (std::size_t row = 2; row <= deg; ++row) {
    if (!(cur[0] > tiny)) return false;
    std::vector<double> next(width, 0.0);
    for (std::size_t j = 0; j + 1 < width; ++j) {
      next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
    }
    prev = cur;
    cur = next;
  }
  return cur[0] > tiny;
}

/// True iff every eigenvalue of A has real part < -margin. Supports n <= 8.
inline bool is_hurwitz(const Mat& a, double margin = 1e-9) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n) throw Error(ErrorCode::kInvalidArgument, "is_hurwitz needs a square matrix");
  if (n > kMaxDim) throw Error(ErrorCode::kInvalidArgument, "is_hurwitz supports n <= 8");
  if (n == 0) return true;
  if (!a.allFinite()) return false;
  Mat shifted = a + margin * Mat::Identity(n, n);
  const double scale = shifted.norm();
  if (scale == 0.0) return false;
  shifted /= scale;
  return routh_stable(characteristic_polynomial(shifted));
}

// ---------------------------------------------------------------------------
// Controllability / observability ranks. The Krylov blocks are formed with
// A scaled to unit norm, which leaves the rank unchanged.

inline int ctrb_rank(const Mat& a, const Mat& b, double rtol = kDefaultRankTol) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n) throw Error(ErrorCode::kInvalidArgument, "ctrb_rank: shape mismatch");
  const double s = a.norm() > 0.0 ? a.norm() : 1.0;
  const Eigen::MatrixXd as = a / s;
  Eigen::MatrixXd c(n, n * m);
  Eigen::MatrixXd blk = b;
  for (int k = 0; k < n; ++k) {
    c.middleCols(k * m, m) = blk;
    blk = as * blk;
  }
  return numerical_rank(c, rtol);
}

inline int obsv_rank(const Mat& c, const Mat& a, double rtol = kDefaultRankTol) {
  const int n = static_cast<int>(a.rows());
  const int p = static_cast<int>(c.rows());
  if (a.cols() != n || c.cols() != n) throw Error(ErrorCode::kInvalidArgument, "obsv_rank: shape mismatch");
  const double s = a.norm() > 0.0 ? a.norm() : 1.0;
  const Eigen::MatrixXd as = a / s;
  Eigen::MatrixXd o(p * n, n);
  Eigen::MatrixXd blk = c;
  for (int k = 0; k < n; ++k) {
    o.middleRows(k * p, p) = blk;
    blk = blk * as;
  }
  return numerical_rank(o, rtol);
}

}  // namespace mrarl
