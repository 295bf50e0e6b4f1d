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

// Run outputs: metrics.csv, states.csv, summary.txt, and the terminal
// statistics they report. Numbers are written with 17 significant digits so
// a round trip reproduces every double exactly; lines end in LF.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mrarl/error.hpp"
#include "mrarl/sim.hpp"

namespace mrarl::io {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return NAN;
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kIo, "bad number in CSV: '" + std::string(s) + "'");
  }
  return v;
}

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> c{"t",   "norm_e",   "norm_Ahat_err", "norm_K_err",   "care_residual", "V_A",
                                          "V_e", "V_m",      "norm_Adot",     "pe_margin_xm", "dither_amp"};
  return c;
}

inline std::vector<double> metrics_row(const Record& r) {
  const Metrics& m = r.metrics;
  return {r.t, m.norm_e, m.norm_ahat_err, m.norm_k_err, m.care_residual, m.v_a,
          m.v_e, m.v_m,  m.norm_adot,     m.pe_margin_xm, m.norm_d};
}

inline void write_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << format_double(row[i]);
  }
  os << '\n';
}

inline void write_header(std::ostream& os, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

inline void write_metrics_csv(std::ostream& os, const Trajectory& traj) {
  write_header(os, metrics_columns());
  for (const auto& r : traj.records) write_row(os, metrics_row(r));
}

inline std::vector<std::string> states_columns(int n, int m) {
  std::vector<std::string> c{"t"};
  auto vec = [&](const char* name, int k) {
    for (int i = 0; i < k; ++i) c.push_back(std::string(name) + "_" + std::to_string(i + 1));
  };
  auto mat = [&](const char* name, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c.push_back(std::string(name) + "_" + std::to_string(i + 1) + std::to_string(j + 1));
  };
  vec("x", n);
  vec("xm", n);
  vec("e", n);
  vec("xi", n);
  vec("zeta", n);
  vec("u", m);
  vec("d", m);
  mat("Ahat", n, n);
  mat("Phat", n, n);
  mat("Ka", m, n);
  mat("A", n, n);
  mat("Kstar", m, n);
  for (const char* extra : {"norm_x", "norm_eps_tilde", "P_gap"}) c.push_back(extra);
  return c;
}

inline void write_states_csv(std::ostream& os, const Trajectory& traj, int n, int m) {
  write_header(os, states_columns(n, m));
  std::vector<double> row;
  for (const auto& r : traj.records) {
    row.clear();
    row.push_back(r.t);
    for (const Vec* v : {&r.x, &r.xm, &r.e, &r.xi, &r.zeta, &r.u, &r.d})
      for (Eigen::Index i = 0; i < v->size(); ++i) row.push_back((*v)(i));
    for (const Mat* a : {&r.a_hat, &r.p_hat, &r.k_a, &r.a_true, &r.k_star})
      for (Eigen::Index i = 0; i < a->rows(); ++i)
        for (Eigen::Index j = 0; j < a->cols(); ++j) row.push_back((*a)(i, j));
    row.push_back(r.metrics.norm_x);
    row.push_back(r.metrics.norm_eps_tilde);
    row.push_back(r.metrics.p_gap);
    write_row(os, row);
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(ErrorCode::kIo, "CSV has no column '" + std::string(name) + "'");
  }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ',') {
        out.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    }
    return out;
  };
  if (!std::getline(is, line)) throw Error(ErrorCode::kIo, "empty CSV");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) throw Error(ErrorCode::kIo, "CSV row width differs from header");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  return read_csv(in);
}

// ---------------------------------------------------------------------------

/// Terminal and windowed statistics of a finished run.
struct RunSummary {
  Metrics final_metrics;
  double peak_norm_e = 0.0;
  double mean_norm_e_tail = 0.0;      // mean |e| over the last 10% of records
  double p_gap_sup_after_burn_in = 0.0;  // sup |P_hat - P(A_hat)|_F after the first 10%
  double peak_norm_x_last_window = 0.0;  // over the final PE window
  double pe_margin_last_window = NAN;    // PE margin of x_m over the final window
  double duration = 0.0;
  int substeps = 1;
  InvariantReport invariants;
};

inline RunSummary summarize(const RunResult& run, const SimConfig& cfg) {
  RunSummary s;
  const auto& recs = run.trajectory.records;
  s.invariants = run.invariants;
  s.substeps = run.substeps;
  if (recs.empty()) return s;
  s.final_metrics = recs.back().metrics;
  s.duration = recs.back().t - recs.front().t;
  const std::size_t tail = std::max<std::size_t>(1, recs.size() / 10);
  double acc = 0.0;
  for (std::size_t i = recs.size() - tail; i < recs.size(); ++i) acc += recs[i].metrics.norm_e;
  s.mean_norm_e_tail = acc / static_cast<double>(tail);
  const double burn = recs.front().t + 0.1 * s.duration;
  const double window = cfg.effective_pe_window();
  const double window_start = recs.back().t - window;
  std::vector<Vec> xm_tail;
  for (const auto& r : recs) {
    s.peak_norm_e = std::max(s.peak_norm_e, r.metrics.norm_e);
    if (r.t >= burn) s.p_gap_sup_after_burn_in = std::max(s.p_gap_sup_after_burn_in, r.metrics.p_gap);
    if (r.t >= window_start - 1e-9) {
      s.peak_norm_x_last_window = std::max(s.peak_norm_x_last_window, r.metrics.norm_x);
      xm_tail.push_back(r.xm);
    }
  }
  if (xm_tail.size() >= 2 && run.trajectory.log_dt > 0.0) {
    try {
      s.pe_margin_last_window =
          pe_margin(xm_tail, run.trajectory.log_dt, static_cast<double>(xm_tail.size() - 1) * run.trajectory.log_dt);
    } catch (const Error&) {
      s.pe_margin_last_window = NAN;
    }
  }
  return s;
}

inline void write_summary(std::ostream& os, const RunSummary& s) {
  auto kv = [&](const char* k, double v) { os << k << " = " << format_double(v) << '\n'; };
  auto ki = [&](const char* k, long v) { os << k << " = " << v << '\n'; };
  const Metrics& m = s.final_metrics;
  kv("t_final", s.duration);
  ki("substeps", s.substeps);
  kv("final.norm_x", m.norm_x);
  kv("final.norm_e", m.norm_e);
  kv("final.norm_Ahat_err", m.norm_ahat_err);
  kv("final.norm_K_err", m.norm_k_err);
  kv("final.care_residual", m.care_residual);
  kv("final.P_gap", m.p_gap);
  kv("final.V_A", m.v_a);
  kv("final.V_e", m.v_e);
  kv("final.V_m", m.v_m);
  kv("final.norm_Adot", m.norm_adot);
  kv("peak_norm_e", s.peak_norm_e);
  kv("mean_norm_e_last_10pct", s.mean_norm_e_tail);
  kv("P_gap_sup_after_burn_in", s.p_gap_sup_after_burn_in);
  kv("peak_norm_x_last_window", s.peak_norm_x_last_window);
  kv("pe_margin_xm_last_window", s.pe_margin_last_window);
  const InvariantReport& v = s.invariants;
  ki("violations.total", v.total());
  ki("violations.adot_bound", v.adot_bound);
  ki("violations.ball", v.ball);
  ki("violations.subspace", v.subspace);
  ki("violations.V_A_increase", v.va_increase);
  ki("violations.V_e_increase", v.ve_increase);
  ki("violations.non_finite", v.non_finite);
  ki("ball_clips", v.clips);
  kv("max_ball_clip", v.max_clip);
  kv("max_adot_over_gamma", v.max_adot_ratio);
  kv("max_subspace_residual", v.max_subspace);
  kv("max_V_A_relative_increase", v.max_va_increase);
  kv("max_V_e_relative_increase", v.max_ve_increase);
}

}  // namespace mrarl::io
