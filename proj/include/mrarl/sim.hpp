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

// Closed-loop simulation of plant + critic + actor.
//
// The stacked state (x, xi, zeta, A_hat, P_hat, x_m, K_a) is advanced with
// classical RK4. A base step `dt` is split into `substeps` equal RK4 steps so
// that h * (fastest rate) stays inside the RK4 stability region; the fastest
// rate is usually the value-iteration flow, whose linearization has
// eigenvalues g * (l_i + l_j) over the eigenvalues l of the reference model.

#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrarl/actor.hpp"
#include "mrarl/critic.hpp"
#include "mrarl/dither.hpp"
#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"
#include "mrarl/plant.hpp"
#include "mrarl/riccati.hpp"

namespace mrarl {

enum class SimMode { kFull, kReduced };

struct Gains {
  double lambda = 10.0;  // swapping filter pole
  double gamma = 5.0;    // identifier step
  double nu = 1.0;       // identifier normalization
  double g = 100.0;      // value-iteration speed
  double mu = 50.0;      // adaptive gain step
};

struct InitialConditions {
  std::optional<Vec> x, xm, xi, zeta;
  std::optional<Mat> a_hat, p_hat, k_a;
};

/// Nominal DFIM parameters and half-widths describing the uncertainty box.
struct DfimRanges {
  double r1_nominal = 0.0, r1_radius = 0.0;
  double r2_nominal = 0.0, r2_radius = 0.0;
  double omegar_nominal = 0.0, omegar_radius = 0.0;
};

struct SimConfig {
  PlantModel plant;
  Mat q, r;
  UncertaintySpec uncertainty;
  Gains gains;
  DitherSpec dither;
  SimMode mode = SimMode::kFull;
  double dt = 1e-4;
  double t_final = 200.0;
  int log_stride = 100;
  int substeps = 0;  // 0 = chosen by the stiffness guard
  unsigned seed = 1;
  double pe_window = 0.0;  // 0 = one period of the slowest dither line
  int theta_samples = 20;
  bool skip_assumption_check = false;
  InitialConditions init;
  std::optional<DfimRanges> dfim_ranges;

  int n() const { return plant.n(); }
  int m() const { return plant.m(); }
  double effective_pe_window() const { return pe_window > 0.0 ? pe_window : dither.slowest_period(); }
};

/// Largest |h * rate| allowed for an RK4 step; the auto guard aims below it.
inline constexpr double kRk4StabilityLimit = 2.5;
inline constexpr double kRk4AutoTarget = 2.0;
inline constexpr double kDivergenceNorm = 1e9;

struct SimState {
  double t = 0.0;
  Vec x, xi, zeta, xm;
  Mat a_hat, p_hat, k_a;
};

struct Metrics {
  double norm_x = 0.0;
  double norm_e = 0.0;
  double norm_ahat_err = 0.0;  // |A_hat - A(t)|_F
  double norm_k_err = 0.0;     // |K_applied - K*(t)|_F
  double care_residual = 0.0;  // |R(P_hat, A_hat)|_F
  double p_gap = 0.0;          // |P_hat - P(A_hat)|_F
  double v_a = NAN;
  double v_e = NAN;
  double v_m = 0.0;
  double norm_adot = 0.0;
  double norm_eps_tilde = 0.0;
  double norm_d = 0.0;
  double pe_margin_xm = NAN;
};

struct Record {
  double t = 0.0;
  Vec x, xm, e, xi, zeta, u, d;
  Mat a_hat, p_hat, k_a, a_true, k_star;
  Metrics metrics;
};

struct Trajectory {
  double log_dt = 0.0;
  std::vector<Record> records;

  std::vector<Vec> xm_series() const {
    std::vector<Vec> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.xm);
    return out;
  }
};

/// Violation counters for the runtime invariants. Each is checked at every
/// RK4 stage (rate bound), every substep (ball membership), every base step
/// (Lyapunov monotonicity; only for time-invariant plants) or every record.
struct InvariantReport {
  long adot_bound = 0;      // |A_hat'|_F > gamma + 1e-12
  long ball = 0;            // |A_hat - A0|_F > rho + 1e-9 before clipping
  long subspace = 0;        // |(I - BB^+)(A_hat - A0)|_F > 1e-8
  long va_increase = 0;     // V_A grew by more than 1e-8 (1 + V_A)
  long ve_increase = 0;     // V_e grew by more than 1e-8 (1 + V_e)
  long non_finite = 0;
  long clips = 0;
  double max_adot_ratio = 0.0;  // max |A_hat'|_F / gamma
  double max_ball_excess = 0.0;
  double max_clip = 0.0;
  double max_subspace = 0.0;
  double max_va_increase = 0.0;  // largest relative increase observed
  double max_ve_increase = 0.0;

  long total() const { return adot_bound + ball + subspace + va_increase + ve_increase + non_finite; }
};

struct AssumptionItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;

  bool all_passed() const {
    for (const auto& i : items)
      if (!i.passed) return false;
    return true;
  }
  const AssumptionItem* find(std::string_view name) const {
    for (const auto& i : items)
      if (i.name == name) return &i;
    return nullptr;
  }
  std::vector<std::string> failed_names() const {
    std::vector<std::string> out;
    for (const auto& i : items)
      if (!i.passed) out.push_back(i.name);
    return out;
  }
};

// ---------------------------------------------------------------------------

namespace detail {

inline double spectral_radius(const Mat& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct Bundle {
  Vec x, xi, zeta, xm;
  Mat a_hat, p_hat, k_a;
};

inline Bundle axpy(const Bundle& y, double h, const Bundle& k) {
  return {y.x + h * k.x,         y.xi + h * k.xi,           y.zeta + h * k.zeta,  y.xm + h * k.xm,
          y.a_hat + h * k.a_hat, y.p_hat + h * k.p_hat,     y.k_a + h * k.k_a};
}

inline double bundle_max_norm(const Bundle& b) {
  return std::max({b.x.norm(), b.xi.norm(), b.zeta.norm(), b.xm.norm(), b.a_hat.norm(), b.p_hat.norm(),
                   b.k_a.norm()});
}

inline bool bundle_finite(const Bundle& b) {
  return b.x.allFinite() && b.xi.allFinite() && b.zeta.allFinite() && b.xm.allFinite() && b.a_hat.allFinite() &&
         b.p_hat.allFinite() && b.k_a.allFinite();
}

}  // namespace detail

/// K*(t) for the frozen-time plant, warm-started from the previous query.
class KStarTracker {
 public:
  KStarTracker(PlantModel plant, LqrCost cost) : plant_(std::move(plant)), cost_(std::move(cost)) {}

  Mat at(double t) {
    if (!plant_.time_varying() && cached_) return *cached_;
    CareOptions opts;
    opts.warm_start = last_p_;
    const CarSolution sol = solve_care(plant_.a_at(t), cost_, opts);
    last_p_ = sol.p;
    if (!plant_.time_varying()) cached_ = sol.k;
    return sol.k;
  }

 private:
  PlantModel plant_;
  LqrCost cost_;
  std::optional<Mat> last_p_;
  std::optional<Mat> cached_;
};

inline Mat kstar_reference(double t, const SimConfig& cfg) {
  KStarTracker tracker(cfg.plant, LqrCost(cfg.plant.b(), cfg.q, cfg.r));
  return tracker.at(t);
}

/// Throws Error(kConfig) on inconsistent dimensions, gains or initial state.
inline void validate_config(const SimConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  const int n = cfg.n();
  const int m = cfg.m();
  if (n <= 0 || m <= 0) fail("plant has empty dimensions");
  if (cfg.q.rows() != n || cfg.q.cols() != n || !is_symmetric(cfg.q)) fail("Q must be symmetric n x n");
  if (min_eigenvalue(cfg.q) < -1e-10) fail("Q must be positive semidefinite");
  if (cfg.r.rows() != m || cfg.r.cols() != m || !is_symmetric(cfg.r)) fail("R must be symmetric m x m");
  if (cfg.uncertainty.center.rows() != n || cfg.uncertainty.center.cols() != n) fail("uncertainty center must be n x n");
  try {
    cfg.uncertainty.validate();
    cfg.dither.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  const Gains& g = cfg.gains;
  if (!(g.lambda > 0.0) || !(g.nu > 0.0) || !(g.g > 0.0)) fail("lambda, nu and g must be positive");
  if (!(g.gamma >= 0.0) || !(g.mu >= 0.0)) fail("gamma and mu must be non-negative");
  if (cfg.dither.channels != m) fail("dither channel count must equal the input dimension");
  if (!(cfg.dt > 0.0)) fail("dt must be positive");
  if (!(cfg.t_final >= 0.0)) fail("t_final must be non-negative");
  if (cfg.log_stride < 1) fail("log_stride must be >= 1");
  if (cfg.substeps < 0) fail("substeps must be >= 0");
  auto check_vec = [&](const std::optional<Vec>& v, const char* name) {
    if (v && v->size() != n) fail(std::string(name) + " must have n entries");
  };
  check_vec(cfg.init.x, "x0");
  check_vec(cfg.init.xm, "xm0");
  check_vec(cfg.init.xi, "xi0");
  check_vec(cfg.init.zeta, "zeta0");
  if (cfg.init.k_a && (cfg.init.k_a->rows() != m || cfg.init.k_a->cols() != n)) fail("Ka0 must be m x n");
  if (cfg.init.a_hat) {
    const Mat& a0 = *cfg.init.a_hat;
    if (a0.rows() != n || a0.cols() != n) fail("Ahat0 must be n x n");
    if (cfg.uncertainty.distance(a0) > cfg.uncertainty.radius + 1e-9) fail("Ahat0 lies outside the uncertainty ball");
    const InputMap input(cfg.plant.b());
    if (input.subspace_residual(a0, cfg.uncertainty.center) > 1e-8) fail("Ahat0 is not in A0 + Image(B)");
  }
  if (cfg.init.p_hat) {
    const Mat& p0 = *cfg.init.p_hat;
    if (p0.rows() != n || p0.cols() != n || !is_symmetric(p0)) fail("Phat0 must be symmetric n x n");
    if (min_eigenvalue(p0) < -1e-10) fail("Phat0 must be positive semidefinite");
  }
}

/// Assumption checks against the true plant. Report-only; never throws for
/// a failed check.
inline AssumptionReport validate_assumptions(const SimConfig& cfg) {
  AssumptionReport rep;
  const int n = cfg.n();
  const InputMap input(cfg.plant.b());
  const UncertaintySpec& unc = cfg.uncertainty;

  // Sample the (possibly drifting) true A over the horizon.
  std::vector<double> times{0.0};
  if (cfg.plant.time_varying()) {
    const int k = 200;
    for (int i = 1; i <= k; ++i) times.push_back(cfg.t_final * i / k);
  }
  double worst_dist = 0.0;
  double worst_match = 0.0;
  double worst_t = 0.0;
  for (double t : times) {
    const Mat a = cfg.plant.a_at(t);
    const double dist = unc.distance(a);
    if (dist > worst_dist) {
      worst_dist = dist;
      worst_t = t;
    }
    worst_match = std::max(worst_match, input.subspace_residual(unc.center, a) / (1.0 + (unc.center - a).norm()));
  }
  rep.items.push_back({"interiority", worst_dist < unc.radius,
                       "max |A(t) - A0|_F = " + std::to_string(worst_dist) + " at t = " + std::to_string(worst_t) +
                           ", radius " + std::to_string(unc.radius) + ", margin " +
                           std::to_string(unc.radius - worst_dist)});
  rep.items.push_back({"matching", worst_match <= 1e-8,
                       "max relative |(I - BB^+)(A0 - A)|_F = " + std::to_string(worst_match)});

  if (cfg.dfim_ranges && cfg.plant.dfim_params()) {
    const DfimRanges& rg = *cfg.dfim_ranges;
    bool ok = true;
    std::string detail;
    for (double t : times) {
      const DfimParams p = *cfg.plant.params_at(t);
      const bool in = std::abs(p.r1 - rg.r1_nominal) <= rg.r1_radius + 1e-12 &&
                      std::abs(p.r2 - rg.r2_nominal) <= rg.r2_radius + 1e-12 &&
                      (rg.omegar_radius <= 0.0 ? std::abs(p.omegar - rg.omegar_nominal) <= 1e-9 * (1 + p.omegar)
                                               : std::abs(p.omegar - rg.omegar_nominal) <= rg.omegar_radius + 1e-9);
      if (!in && ok) detail = "parameters leave the nominal ranges at t = " + std::to_string(t);
      ok = ok && in;
    }
    rep.items.push_back({"parameter-ranges", ok, ok ? "true parameters within nominal +/- radius" : detail});
  }

  ThetaSpec theta{unc.center, unc.radius, cfg.plant.b(), cfg.q, cfg.r};
  SamplerReport sampler;
  try {
    sampler = care_map_sampler(theta, cfg.theta_samples, cfg.seed);
  } catch (const Error& e) {
    rep.items.push_back({"controllability", false, e.what()});
    return rep;
  }
  auto summarize = [&](const char* name, auto pred) {
    int bad = 0;
    std::string first;
    for (const auto& s : sampler.samples) {
      if (!pred(s)) {
        if (bad == 0) first = std::string(to_string(s.kind)) + " sample: " + s.detail;
        ++bad;
      }
    }
    rep.items.push_back({name, bad == 0,
                         std::to_string(sampler.samples.size() - static_cast<std::size_t>(bad)) + "/" +
                             std::to_string(sampler.samples.size()) + " Theta samples pass" +
                             (bad ? "; first failure: " + first : std::string())});
  };
  summarize("controllability", [](const SampleCheck& s) { return s.controllable; });
  summarize("observability", [](const SampleCheck& s) { return s.observable; });
  summarize("care-solvable", [](const SampleCheck& s) { return s.care_solved && s.positive_definite; });

  const RichnessReport rich = richness_check(cfg.dither, n + 1);
  std::string freq_detail = "needs " + std::to_string(rich.required_lines) + " lines per channel";
  if (!rich.shared_frequencies.empty()) freq_detail += "; lines shared across channels: " +
                                                       std::to_string(rich.shared_frequencies.size());
  // Excitation matters only while the identifier is learning.
  const bool learning = cfg.gains.gamma > 0.0;
  const bool excited = rich.ok() && cfg.dither.amplitude > 0.0;
  rep.items.push_back({"dither-richness", excited || !learning,
                       freq_detail + (rich.uncorrelated ? "" : "; channels linearly dependent") +
                           (cfg.dither.amplitude > 0.0 ? "" : "; dither disabled")});
  return rep;
}

// ---------------------------------------------------------------------------

class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : Simulator(std::move(cfg), std::nullopt) {}

  /// Starts from an explicit state (e.g. the end of a previous run); the
  /// initial-condition fields of the config are ignored.
  Simulator(SimConfig cfg, std::optional<SimState> start) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    const int n = cfg_.n();
    const int m = cfg_.m();
    cost_ = LqrCost(cfg_.plant.b(), cfg_.q, cfg_.r);
    input_ = InputMap(cfg_.plant.b());
    a_const_ = cfg_.plant.a_at(0.0);
    kstar_.emplace(cfg_.plant, cost_);
    if (start) {
      state_ = *start;
    } else {
      const InitialConditions& ic = cfg_.init;
      state_.t = 0.0;
      state_.x = ic.x.value_or(Vec::Zero(n));
      state_.xm = ic.xm.value_or(Vec::Zero(n));
      state_.xi = ic.xi.value_or(Vec::Zero(n));
      state_.zeta = ic.zeta.value_or(Vec::Zero(n));
      state_.a_hat = ic.a_hat.value_or(cfg_.uncertainty.center);
      state_.p_hat = ic.p_hat ? *ic.p_hat : solve_care(state_.a_hat, cost_).p;
      state_.k_a = ic.k_a.value_or(Mat::Zero(m, n));
    }
    start_time_ = state_.t;
    substeps_ = choose_substeps();
    if (cfg_.mode == SimMode::kReduced) {
      CareOptions opts;
      opts.warm_start = state_.p_hat;
      state_.p_hat = solve_care(state_.a_hat, cost_, opts).p;
    }
    refresh_lyapunov_baseline();
  }

  const SimConfig& config() const { return cfg_; }
  const SimState& state() const { return state_; }
  const InvariantReport& invariants() const { return inv_; }
  int substeps() const { return substeps_; }
  long steps_taken() const { return steps_; }
  const LqrCost& cost() const { return cost_; }
  const InputMap& input() const { return input_; }

  /// Worst-case |h * rate| estimate behind the substep choice.
  double stiffness_rate() const { return rate_estimate_; }

  /// Advances one base step of size dt.
  void step() {
    const double h = cfg_.dt / substeps_;
    const double t0 = start_time_ + static_cast<double>(steps_) * cfg_.dt;
    detail::Bundle y = bundle();
    for (int s = 0; s < substeps_; ++s) {
      const double t = t0 + s * h;
      const detail::Bundle k1 = flow(t, y);
      const detail::Bundle k2 = flow(t + 0.5 * h, detail::axpy(y, 0.5 * h, k1));
      const detail::Bundle k3 = flow(t + 0.5 * h, detail::axpy(y, 0.5 * h, k2));
      const detail::Bundle k4 = flow(t + h, detail::axpy(y, h, k3));
      const double w = h / 6.0;
      y.x += w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      y.xi += w * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi);
      y.zeta += w * (k1.zeta + 2.0 * k2.zeta + 2.0 * k3.zeta + k4.zeta);
      y.xm += w * (k1.xm + 2.0 * k2.xm + 2.0 * k3.xm + k4.xm);
      y.a_hat += w * (k1.a_hat + 2.0 * k2.a_hat + 2.0 * k3.a_hat + k4.a_hat);
      y.k_a += w * (k1.k_a + 2.0 * k2.k_a + 2.0 * k3.k_a + k4.k_a);
      if (cfg_.mode == SimMode::kFull) {
        y.p_hat += w * (k1.p_hat + 2.0 * k2.p_hat + 2.0 * k3.p_hat + k4.p_hat);
        y.p_hat = symmetrize(y.p_hat);
      }
      enforce_ball(y.a_hat);
      if (!detail::bundle_finite(y)) {
        ++inv_.non_finite;
        throw Error(ErrorCode::kDivergence, "non-finite state at t = " + std::to_string(t + h));
      }
      if (detail::bundle_max_norm(y) > kDivergenceNorm) {
        throw Error(ErrorCode::kDivergence, "state norm exceeded 1e9 at t = " + std::to_string(t + h));
      }
    }
    ++steps_;
    state_.t = start_time_ + static_cast<double>(steps_) * cfg_.dt;
    state_.x = y.x;
    state_.xi = y.xi;
    state_.zeta = y.zeta;
    state_.xm = y.xm;
    state_.a_hat = y.a_hat;
    state_.k_a = y.k_a;
    state_.p_hat = y.p_hat;
    if (cfg_.mode == SimMode::kReduced) {
      CareOptions opts;
      opts.warm_start = state_.p_hat;
      state_.p_hat = solve_care(state_.a_hat, cost_, opts).p;
    }
    check_lyapunov();
  }

  /// Snapshot of the current state with every derived metric.
  Record record() {
    const SimState& s = state_;
    Record r;
    r.t = s.t;
    r.x = s.x;
    r.xm = s.xm;
    r.e = s.x - s.xm;
    r.xi = s.xi;
    r.zeta = s.zeta;
    r.a_hat = s.a_hat;
    r.p_hat = s.p_hat;
    r.k_a = s.k_a;
    r.d = dither_eval(cfg_.dither, s.t);
    r.u = control_law(s.x, s.p_hat, s.k_a, r.d, cost_);
    r.a_true = cfg_.plant.a_at(s.t);
    r.k_star = kstar_->at(s.t);

    Metrics& mt = r.metrics;
    mt.norm_x = s.x.norm();
    mt.norm_e = r.e.norm();
    mt.norm_d = r.d.norm();
    mt.norm_ahat_err = (s.a_hat - r.a_true).norm();
    mt.norm_k_err = (applied_gain(s.p_hat, s.k_a, cost_) - r.k_star).norm();
    mt.care_residual = care_residual(s.p_hat, s.a_hat, cost_);
    mt.v_m = vm_monitor(s.xm, s.p_hat);
    const Vec et = eps_tilde(r.a_true, s.xi, s.x, s.zeta);
    mt.norm_eps_tilde = et.norm();
    if (cfg_.gains.gamma > 0.0) mt.v_a = va_monitor(et, s.a_hat - r.a_true, cfg_.gains.lambda, cfg_.gains.gamma);
    if (cfg_.gains.mu > 0.0) {
      const Mat k_match = input_.b_pinv() * (s.a_hat - r.a_true);
      mt.v_e = ve_monitor(r.e, s.k_a - k_match, s.p_hat, cfg_.gains.mu);
    }
    const CriticState cs{s.xi, s.zeta, s.a_hat, s.p_hat};
    mt.norm_adot = identifier_flow(cs, s.x, cfg_.uncertainty, input_, cfg_.gains.gamma, cfg_.gains.nu).norm();
    CareOptions opts;
    opts.warm_start = gap_warm_ ? gap_warm_ : std::optional<Mat>(s.p_hat);
    const CarSolution exact = solve_care(s.a_hat, cost_, opts);
    gap_warm_ = exact.p;
    mt.p_gap = (s.p_hat - exact.p).norm();

    const double sub = input_.subspace_residual(s.a_hat, cfg_.uncertainty.center);
    inv_.max_subspace = std::max(inv_.max_subspace, sub);
    if (sub > 1e-8) ++inv_.subspace;
    return r;
  }

 private:
  detail::Bundle bundle() const {
    return {state_.x, state_.xi, state_.zeta, state_.xm, state_.a_hat, state_.p_hat, state_.k_a};
  }

  detail::Bundle flow(double t, const detail::Bundle& s) {
    const Gains& gn = cfg_.gains;
    const Mat& b = input_.b();
    const Vec d = dither_eval(cfg_.dither, t);
    const Vec u = control_law(s.x, s.p_hat, s.k_a, d, cost_);
    const Vec bu = b * u;
    detail::Bundle r;
    if (cfg_.plant.time_varying()) {
      r.x = cfg_.plant.a_at(t) * s.x + bu;
    } else {
      r.x = a_const_ * s.x + bu;
    }
    r.xi = -gn.lambda * s.xi + s.x;
    r.zeta = -gn.lambda * (s.x + s.zeta) - bu;
    const Vec eps = prediction_error(s.a_hat, s.xi, s.x, s.zeta);
    r.a_hat = proj_ball(s.a_hat, identifier_gradient(eps, s.xi, input_, gn.gamma, gn.nu), cfg_.uncertainty);
    const double adot = r.a_hat.norm();
    if (gn.gamma > 0.0) inv_.max_adot_ratio = std::max(inv_.max_adot_ratio, adot / gn.gamma);
    if (adot > gn.gamma + 1e-12) ++inv_.adot_bound;
    if (cfg_.mode == SimMode::kFull) {
      r.p_hat = dre_flow(s.p_hat, s.a_hat, cost_, gn.g);
    } else {
      r.p_hat = Mat::Zero(s.p_hat.rows(), s.p_hat.cols());
    }
    r.xm = refmodel_flow(s.xm, s.a_hat, s.p_hat, cost_, d);
    r.k_a = adaptive_flow(s.p_hat, s.x, s.xm, r.a_hat, input_, gn.mu);
    return r;
  }

  void enforce_ball(Mat& a_hat) {
    const double dist = cfg_.uncertainty.distance(a_hat);
    const double excess = dist - cfg_.uncertainty.radius;
    if (excess > 1e-9) {
      ++inv_.ball;
      inv_.max_ball_excess = std::max(inv_.max_ball_excess, excess);
    }
    if (excess > 0.0) {
      a_hat = cfg_.uncertainty.center + (cfg_.uncertainty.radius / dist) * (a_hat - cfg_.uncertainty.center);
      ++inv_.clips;
      inv_.max_clip = std::max(inv_.max_clip, excess);
    }
  }

  std::pair<double, double> lyapunov_values() const {
    const Gains& gn = cfg_.gains;
    double va = NAN;
    double ve = NAN;
    if (gn.gamma > 0.0) {
      va = va_monitor(eps_tilde(a_const_, state_.xi, state_.x, state_.zeta), state_.a_hat - a_const_, gn.lambda,
                      gn.gamma);
    }
    if (gn.mu > 0.0) {
      const Mat k_match = input_.b_pinv() * (state_.a_hat - a_const_);
      ve = ve_monitor(state_.x - state_.xm, state_.k_a - k_match, state_.p_hat, gn.mu);
    }
    return {va, ve};
  }

  void refresh_lyapunov_baseline() {
    if (cfg_.plant.time_varying()) return;
    std::tie(last_va_, last_ve_) = lyapunov_values();
  }

  // V_A and V_e are only Lyapunov functions for a constant true A.
  void check_lyapunov() {
    if (cfg_.plant.time_varying()) return;
    const auto [va, ve] = lyapunov_values();
    auto check = [](double prev, double cur, long& count, double& worst) {
      if (!std::isfinite(prev) || !std::isfinite(cur)) return;
      const double rel = (cur - prev) / (1.0 + prev);
      worst = std::max(worst, rel);
      if (rel > 1e-8) ++count;
    };
    check(last_va_, va, inv_.va_increase, inv_.max_va_increase);
    check(last_ve_, ve, inv_.ve_increase, inv_.max_ve_increase);
    last_va_ = va;
    last_ve_ = ve;
  }

  int choose_substeps() {
    const Gains& gn = cfg_.gains;
    const Mat acl_model = state_.a_hat - cost_.s() * state_.p_hat;
    const double model_rate = detail::spectral_radius(acl_model);
    const Mat acl_plant = a_const_ + cost_.b() * applied_gain(state_.p_hat, state_.k_a, cost_);
    double rate = std::max({detail::spectral_radius(acl_plant), model_rate, gn.lambda});
    if (cfg_.mode == SimMode::kFull) {
      // Eigenvalues of the linearized value iteration are g (l_i + l_j) over
      // the model poles l. A_hat travels toward the true A(t), so the optimal
      // closed loops along the schedule are sampled as well.
      double pole = model_rate;
      const int samples = cfg_.plant.time_varying() ? 16 : 0;
      for (int i = 0; i <= samples; ++i) {
        const double t = samples ? cfg_.t_final * i / samples : 0.0;
        const Mat a = cfg_.plant.a_at(t);
        try {
          const CarSolution sol = solve_care(a, cost_);
          pole = std::max(pole, detail::spectral_radius(Mat(a - cost_.s() * sol.p)));
        } catch (const Error&) {
          pole = std::max(pole, detail::spectral_radius(a));
        }
      }
      rate = std::max(rate, 2.0 * gn.g * pole);
    }
    rate_estimate_ = rate;
    if (cfg_.substeps > 0) {
      if (cfg_.dt / cfg_.substeps * rate > kRk4StabilityLimit) {
        throw Error(ErrorCode::kConfig, "dt / substeps too large for RK4 stability: h * rate = " +
                                            std::to_string(cfg_.dt / cfg_.substeps * rate) + " > 2.5");
      }
      return cfg_.substeps;
    }
    return std::max(1, static_cast<int>(std::ceil(cfg_.dt * rate / kRk4AutoTarget)));
  }

  SimConfig cfg_;
  LqrCost cost_;
  InputMap input_;
  Mat a_const_;
  std::optional<KStarTracker> kstar_;
  std::optional<Mat> gap_warm_;
  SimState state_;
  double start_time_ = 0.0;
  long steps_ = 0;
  int substeps_ = 1;
  double rate_estimate_ = 0.0;
  double last_va_ = NAN;
  double last_ve_ = NAN;
  InvariantReport inv_;
};

struct RunResult {
  Trajectory trajectory;
  InvariantReport invariants;
  SimState final_state;
  int substeps = 1;
};

/// Fills pe_margin_xm with the trailing-window PE margin of x_m.
inline void annotate_pe_margin(Trajectory& traj, double window) {
  if (traj.records.size() < 2 || !(traj.log_dt > 0.0)) return;
  const std::vector<Vec> xm = traj.xm_series();
  const std::vector<double> pe = pe_margin_trailing(xm, traj.log_dt, window);
  for (std::size_t i = 0; i < pe.size(); ++i) traj.records[i].metrics.pe_margin_xm = pe[i];
}

/// Integrates to t_final, logging every log_stride base steps. Deterministic
/// for a fixed config.
inline RunResult run(const SimConfig& cfg, std::optional<SimState> start = std::nullopt) {
  if (!cfg.skip_assumption_check && !start) {
    const AssumptionReport rep = validate_assumptions(cfg);
    if (!rep.all_passed()) {
      std::string names;
      for (const auto& n : rep.failed_names()) names += (names.empty() ? "" : ", ") + n;
      throw Error(ErrorCode::kConfig, "assumption check failed: " + names);
    }
  }
  Simulator sim(cfg, start);
  RunResult out;
  out.substeps = sim.substeps();
  out.trajectory.log_dt = cfg.dt * cfg.log_stride;
  const long total = std::llround(cfg.t_final / cfg.dt);
  out.trajectory.records.reserve(static_cast<std::size_t>(total / cfg.log_stride + 1));
  out.trajectory.records.push_back(sim.record());
  for (long k = 1; k <= total; ++k) {
    sim.step();
    if (k % cfg.log_stride == 0) out.trajectory.records.push_back(sim.record());
  }
  annotate_pe_margin(out.trajectory, cfg.effective_pe_window());
  out.invariants = sim.invariants();
  out.final_state = sim.state();
  return out;
}

}  // namespace mrarl
