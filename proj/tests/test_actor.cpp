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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrarl/actor.hpp"
#include "mrarl/integrator.hpp"
#include "oracles.hpp"

namespace mrarl {
namespace {

Mat S(double v) { return Mat::Constant(1, 1, v); }
Vec V(double v) { return Vec::Constant(1, v); }

TEST(RefmodelFlow, Examples) {
  const LqrCost cost(Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2));
  const Mat a = (Mat(2, 2) << 0, 1, -1, 0).finished();
  EXPECT_EQ(refmodel_flow(Vec::Zero(2), a, Mat::Identity(2, 2), cost, Vec::Zero(2)), Vec::Zero(2));
  const Vec xm = (Vec(2) << 1, 2).finished();
  EXPECT_EQ(refmodel_flow(xm, a, Mat::Zero(2, 2), cost, Vec::Zero(2)), Vec(a * xm));

  const LqrCost scalar(S(1), S(1), S(1));
  EXPECT_NEAR(refmodel_flow(V(1), S(1), S(1 + std::sqrt(2.0)), scalar, V(0))(0), -std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(refmodel_flow(V(0), S(1), S(1), scalar, V(2.5))(0), 2.5, 1e-15);
}

TEST(AdaptiveFlow, Examples) {
  const InputMap id(Mat::Identity(2, 2));
  const Vec x = (Vec(2) << 0.5, -1).finished();
  EXPECT_EQ(adaptive_flow(Mat::Identity(2, 2), x, x, Mat::Zero(2, 2), id, 5.0), Mat::Zero(2, 2));

  const Mat b = (Mat(2, 2) << 2, 1, 0, 1).finished();
  const Mat d = (Mat(2, 2) << 1, -1, 3, 0.5).finished();
  EXPECT_LE((adaptive_flow(Mat::Identity(2, 2), x, x, Mat(b * d), InputMap(b), 5.0) - d).norm(), 1e-13);

  const Vec e1 = Vec::Unit(2, 0);
  const Mat expect = -e1 * e1.transpose();
  EXPECT_EQ(adaptive_flow(Mat::Identity(2, 2), e1, Vec::Zero(2), Mat::Zero(2, 2), id, 1.0), expect);
}

TEST(ControlLaw, Examples) {
  const LqrCost scalar(S(1), S(1), S(1));
  EXPECT_EQ(control_law(V(0), S(3), S(0.5), V(0.7), scalar), V(0.7));
  EXPECT_DOUBLE_EQ(control_law(V(2), S(1), S(0.5), V(0), scalar)(0), -1.0);

  std::mt19937_64 rng(4);
  const oracle::RandomSystem sys = oracle::random_controllable(rng, 4, 2);
  const long n = sys.a.rows();
  const long m = sys.b.cols();
  const LqrCost cost(sys.b, Mat::Identity(n, n), Mat::Identity(m, m));
  const CarSolution sol = solve_care(sys.a, cost);
  const Vec x = oracle::random_matrix(rng, n, 1);
  EXPECT_LE((control_law(x, sol.p, Mat::Zero(m, n), Vec::Zero(m), cost) - sol.k * x).norm(), 1e-12 * (1 + x.norm()));
  EXPECT_EQ(applied_gain(sol.p, Mat::Zero(m, n), cost), sol.k);
}

TEST(ControlLaw, SingularWeightRejectedAtConstruction) {
  try {
    LqrCost bad(S(1), S(1), S(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRNotInvertible);
  }
}

TEST(MatchingGain, Examples) {
  std::mt19937_64 rng(6);
  const Mat a = oracle::random_matrix(rng, 3, 3);
  const Mat a_hat = oracle::random_matrix(rng, 3, 3);
  EXPECT_EQ(matching_gain_oracle(a, a, InputMap(Mat::Identity(3, 3))), Mat::Zero(3, 3));
  EXPECT_LE((matching_gain_oracle(a_hat, a, InputMap(Mat::Identity(3, 3))) - (a_hat - a)).norm(), 1e-14);

  const Mat b = oracle::random_matrix(rng, 3, 3);
  const Mat mm = oracle::random_matrix(rng, 3, 3);
  const Mat k = matching_gain_oracle(a + b * mm, a, InputMap(b));
  EXPECT_LE((k - mm).norm(), 1e-9 * (1 + mm.norm()));
  EXPECT_LE((b * k - b * mm).norm(), 1e-9 * (1 + mm.norm()));
}

TEST(MatchingGain, ViolationRaises) {
  const Mat b = (Mat(2, 1) << 1, 0).finished();
  const Mat a = Mat::Zero(2, 2);
  const Mat bad = (Mat(2, 2) << 0, 0, 1, 0).finished();
  try {
    matching_gain_oracle(bad, a, InputMap(b));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMatchingViolation);
  }
  const Mat ok = (Mat(2, 2) << 2, -1, 0, 0).finished();
  const Mat k = matching_gain_oracle(ok, a, InputMap(b));
  EXPECT_LE((b * k - ok).norm(), 1e-9);
}

TEST(Monitors, Examples) {
  EXPECT_EQ(ve_monitor(Vec::Zero(2), Mat::Zero(1, 2), Mat::Identity(2, 2), 1.0), 0.0);
  EXPECT_DOUBLE_EQ(ve_monitor(Vec::Unit(2, 0), Mat::Zero(1, 2), Mat::Identity(2, 2), 1.0), 1.0);
  const Vec e = (Vec(2) << 0.2, -0.7).finished();
  const Mat p = (Mat(2, 2) << 2, 0.5, 0.5, 1).finished();
  EXPECT_DOUBLE_EQ(ve_monitor(2.0 * e, Mat::Zero(1, 2), p, 3.0), 4.0 * ve_monitor(e, Mat::Zero(1, 2), p, 3.0));
  EXPECT_DOUBLE_EQ(ve_monitor(Vec::Zero(2), Mat::Constant(1, 2, 1.0), p, 4.0), 0.5);
  EXPECT_DOUBLE_EQ(vm_monitor(e, p), e.dot(p * e));
}

// With e held at zero the tracking term vanishes and K_a integrates
// B^+ A_hat' exactly, so it follows K_a(A_hat(t)) = B^+ (A_hat(t) - A).
TEST(AdaptiveFlow, DriftCompensationTracksMatchingGain) {
  std::mt19937_64 rng(12);
  const int n = 3;
  const Mat a = oracle::random_matrix(rng, n, n);
  const Mat b = oracle::random_matrix(rng, n, 2);
  const InputMap input(b);
  const Mat m1 = oracle::random_matrix(rng, 2, n);
  const Mat m2 = oracle::random_matrix(rng, 2, n);
  // A_hat(t) = A + B (sin t M1 + t^2 M2 / 10), inside A + Image(B).
  auto a_hat = [&](double t) { return Mat(a + b * (std::sin(t) * m1 + 0.1 * t * t * m2)); };
  auto a_hat_dot = [&](double t) { return Mat(b * (std::cos(t) * m1 + 0.2 * t * m2)); };
  const Mat p = Mat::Identity(n, n);
  const Vec x = oracle::random_matrix(rng, n, 1);
  Mat k = matching_gain_oracle(a_hat(0.0), a, input);
  const double h = 1e-2;
  double t = 0.0;
  for (int i = 0; i < 300; ++i, t += h) {
    k = rk4_step([&](double s, const Mat&) { return adaptive_flow(p, x, x, a_hat_dot(s), input, 50.0); }, t, k, h);
  }
  const Mat expect = matching_gain_oracle(a_hat(t), a, input);
  EXPECT_LE((k - expect).norm(), 1e-9 * (1 + expect.norm()));
}

}  // namespace
}  // namespace mrarl
