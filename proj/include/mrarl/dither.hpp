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

// Probing signal and persistency-of-excitation measurements.
//
// Channel i (1-based) is  amplitude * sum_{j=1..terms} w(2 * omega_s * i * j * t)
// with w a unit-amplitude waveform. The signal is a plain function of time;
// no exosystem state is integrated.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"

namespace mrarl {

enum class Waveform { kTriangular, kSinusoidal };

struct DitherSpec {
  double amplitude = 10.0;
  double omega_s = 0.2;  // rad/s
  int channels = 4;
  int terms_per_channel = 4;
  Waveform waveform = Waveform::kTriangular;

  void validate() const {
    if (!(amplitude >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "dither amplitude must be >= 0");
    if (!(omega_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dither omega_s must be > 0");
    if (channels < 0 || channels > kMaxDim || terms_per_channel < 0) {
      throw Error(ErrorCode::kInvalidArgument, "dither channel/term counts out of range");
    }
  }
  /// One period of the slowest line.
  double slowest_period() const { return 2.0 * M_PI / (2.0 * omega_s); }
};

/// Odd, 2*pi-periodic, unit amplitude, zero at theta = 0.
inline double triangular(double theta) { return (2.0 / M_PI) * std::asin(std::sin(theta)); }

inline double waveform_eval(Waveform w, double theta) {
  return w == Waveform::kTriangular ? triangular(theta) : std::sin(theta);
}

inline Vec dither_eval(const DitherSpec& spec, double t) {
  Vec d = Vec::Zero(spec.channels);
  if (spec.amplitude == 0.0) return d;
  for (int i = 1; i <= spec.channels; ++i) {
    double acc = 0.0;
    for (int j = 1; j <= spec.terms_per_channel; ++j) {
      acc += waveform_eval(spec.waveform, 2.0 * spec.omega_s * i * j * t);
    }
    d(i - 1) = spec.amplitude * acc;
  }
  return d;
}

/// Fundamental line frequencies (rad/s) of each channel, deduplicated.
inline std::vector<std::vector<double>> channel_frequencies(const DitherSpec& spec) {
  std::vector<std::vector<double>> out;
  for (int i = 1; i <= spec.channels; ++i) {
    std::vector<double> f;
    for (int j = 1; j <= spec.terms_per_channel; ++j) f.push_back(2.0 * spec.omega_s * i * j);
    out.push_back(std::move(f));
  }
  return out;
}

struct RichnessReport {
  bool rich = false;          // every channel has >= ceil(order / 2) distinct nonzero lines
  bool uncorrelated = false;  // channel line spectra are linearly independent
  int required_lines = 0;
  std::vector<std::vector<double>> frequencies;
  std::vector<double> shared_frequencies;  // lines present in more than one channel

  bool ok() const { return rich && uncorrelated; }
};

namespace detail {
inline bool same_freq(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

inline std::vector<double> distinct_nonzero(const std::vector<double>& f) {
  std::vector<double> out;
  for (double v : f) {
    if (std::abs(v) <= 1e-12) continue;
    bool seen = false;
    for (double w : out) seen = seen || same_freq(v, w);
    if (!seen) out.push_back(std::abs(v));
  }
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace detail

/// Richness check on explicit per-channel line sets.
inline RichnessReport richness_check(const std::vector<std::vector<double>>& frequencies, int order) {
  RichnessReport rep;
  rep.required_lines = (order + 1) / 2;
  rep.rich = true;
  std::vector<std::vector<double>> lines;
  for (const auto& f : frequencies) {
    lines.push_back(detail::distinct_nonzero(f));
    rep.rich = rep.rich && static_cast<int>(lines.back().size()) >= rep.required_lines;
  }
  rep.frequencies = lines;
  std::vector<double> all;
  for (const auto& l : lines)
    for (double v : l) {
      bool seen = false;
      for (double w : all) seen = seen || detail::same_freq(v, w);
      if (!seen) all.push_back(v);
    }
  std::sort(all.begin(), all.end());
  // Incidence of channels on lines; uncorrelated iff the rows are independent.
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lines.size()),
                                              static_cast<Eigen::Index>(all.size()));
  for (std::size_t c = 0; c < lines.size(); ++c) {
    for (std::size_t k = 0; k < all.size(); ++k) {
      for (double v : lines[c])
        if (detail::same_freq(v, all[k])) inc(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  for (std::size_t k = 0; k < all.size(); ++k)
    if (inc.col(static_cast<Eigen::Index>(k)).sum() > 1.5) rep.shared_frequencies.push_back(all[k]);
  rep.uncorrelated = lines.empty() || numerical_rank(inc, 1e-9) == static_cast<int>(lines.size());
  return rep;
}

inline RichnessReport richness_check(const DitherSpec& spec, int order) {
  return richness_check(channel_frequencies(spec), order);
}

// ---------------------------------------------------------------------------
// Persistency of excitation.

namespace detail {
// Prefix sums of trapezoidal interval contributions h (v_k v_k^T + v_{k+1} v_{k+1}^T) / 2.
inline std::vector<Mat> gram_prefix(std::span<const Vec> samples, double h) {
  std::vector<Mat> prefix;
  prefix.reserve(samples.size());
  const int n = samples.empty() ? 0 : static_cast<int>(samples[0].size());
  Mat acc = Mat::Zero(n, n);
  prefix.push_back(acc);
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    acc += (0.5 * h) * (samples[k] * samples[k].transpose() + samples[k + 1] * samples[k + 1].transpose());
    prefix.push_back(acc);
  }
  return prefix;
}

inline std::size_t window_intervals(double h, double window) {
  return static_cast<std::size_t>(std::llround(window / h));
}
}  // namespace detail

/// min over sliding windows of lambda_min( integral over [t, t+T] of v v^T ).
inline double pe_margin(std::span<const Vec> samples, double h, double window) {
  if (!(h > 0.0) || !(window > 0.0)) throw Error(ErrorCode::kInvalidArgument, "pe_margin needs h > 0 and T > 0");
  const std::size_t w = detail::window_intervals(h, window);
  if (samples.empty() || w == 0 || w > samples.size() - 1) {
    throw Error(ErrorCode::kWindowTooLong, "PE window exceeds the series duration");
  }
  const std::vector<Mat> prefix = detail::gram_prefix(samples, h);
  double best = INFINITY;
  for (std::size_t s = 0; s + w < prefix.size(); ++s) {
    best = std::min(best, min_eigenvalue(Mat(prefix[s + w] - prefix[s])));
  }
  return std::max(best, 0.0);
}

/// lambda_min of the trailing-window Gram matrix at every sample; NaN until a
/// full window of history is available.
inline std::vector<double> pe_margin_trailing(std::span<const Vec> samples, double h, double window) {
  std::vector<double> out(samples.size(), NAN);
  if (!(h > 0.0) || !(window > 0.0) || samples.empty()) return out;
  const std::size_t w = detail::window_intervals(h, window);
  if (w == 0) return out;
  const std::vector<Mat> prefix = detail::gram_prefix(samples, h);
  for (std::size_t k = w; k < prefix.size(); ++k) {
    out[k] = std::max(0.0, min_eigenvalue(Mat(prefix[k] - prefix[k - w])));
  }
  return out;
}

}  // namespace mrarl
