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

// mrarl: run, validate and sweep MR-ARL experiments; one-shot CARE solves.
//
// Exit status: 0 success, 1 failed assumption or invariant violation,
// 2 configuration error, 3 divergence, 4 I/O error, 5 solver failure.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mrarl/config.hpp"
#include "mrarl/io.hpp"
#include "mrarl/sim.hpp"

namespace fs = std::filesystem;
using namespace mrarl;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kConfigError = 2, kDiverged = 3, kIoError = 4, kSolverError = 5 };

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kDivergence:
      return kDiverged;
    case ErrorCode::kIo:
      return kIoError;
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDegenerateInductance:
    case ErrorCode::kWindowTooLong:
      return kConfigError;
    default:
      return kSolverError;
  }
}

void setup_logging() {
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("MRARL_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") spdlog::warn("MRARL_LOG='{}' not recognised; using info", level);
    spdlog::set_level(spdlog::level::info);
  }
}

struct Source {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
};

config::Document source_document(const Source& src) {
  if (!src.config_path.empty() && !src.preset.empty()) {
    throw Error(ErrorCode::kConfig, "give either --config or --preset, not both");
  }
  if (!src.preset.empty()) return config::preset_document(src.preset);
  if (!src.config_path.empty()) return config::file_document(src.config_path);
  throw Error(ErrorCode::kConfig, "one of --config or --preset is required");
}

config::Loaded load_source(const Source& src, const std::vector<std::string>& extra = {}) {
  std::vector<std::string> all = src.overrides;
  all.insert(all.end(), extra.begin(), extra.end());
  config::Loaded loaded = config::load(source_document(src), all);
  for (const auto& n : loaded.notices) spdlog::info("{}", n);
  return loaded;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

struct SimOutcome {
  int status = kOk;
  std::string message;
  io::RunSummary summary;
};

// Runs one simulation and writes its outputs into `out`.
SimOutcome simulate_into(const SimConfig& cfg, const fs::path& out, bool full_state) {
  SimOutcome o;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + out.string() + "': " + ec.message());
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult result = run(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.summary = io::summarize(result, cfg);
  std::ostringstream metrics;
  io::write_metrics_csv(metrics, result.trajectory);
  write_file(out / "metrics.csv", metrics.str());
  if (full_state) {
    std::ostringstream states;
    io::write_states_csv(states, result.trajectory, cfg.n(), cfg.m());
    write_file(out / "states.csv", states.str());
  }
  std::ostringstream summary;
  io::write_summary(summary, o.summary);
  summary << "wall_seconds = " << io::format_double(wall) << '\n';
  write_file(out / "summary.txt", summary.str());
  const long violations = o.summary.invariants.total();
  if (violations > 0) {
    o.status = kFailed;
    o.message = std::to_string(violations) + " invariant violations";
  }
  spdlog::debug("{} records, {} substeps, {:.1f} s wall", result.trajectory.records.size(), result.substeps, wall);
  return o;
}

int cmd_simulate(const Source& src, const std::string& out, bool full_state) {
  const config::Loaded loaded = load_source(src);
  const SimOutcome o = simulate_into(loaded.sim, out, full_state);
  const Metrics& m = o.summary.final_metrics;
  spdlog::info("t = {:.6g}: |e| = {:.3e}, |A_hat - A| = {:.3e}, |K - K*| = {:.3e}, violations = {}",
               o.summary.duration, m.norm_e, m.norm_ahat_err, m.norm_k_err, o.summary.invariants.total());
  if (o.status != kOk) spdlog::error("{}", o.message);
  return o.status;
}

int cmd_validate(const Source& src) {
  const config::Loaded loaded = load_source(src);
  const AssumptionReport rep = validate_assumptions(loaded.sim);
  for (const auto& item : rep.items) {
    std::cout << (item.passed ? "PASS " : "FAIL ") << item.name << ": " << item.detail << '\n';
  }
  return rep.all_passed() ? kOk : kFailed;
}

std::string sweep_dir_name(const std::string& key, const std::string& value) {
  std::string s = key + "=" + value;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ' || c == '*') c = '_';
  return s;
}

int cmd_sweep(const Source& src, const std::string& key, const std::vector<std::string>& values, const std::string& out,
              bool full_state, int workers) {
  if (values.empty()) throw Error(ErrorCode::kConfig, "sweep needs at least one value");
  if (key.find('.') == std::string::npos) throw Error(ErrorCode::kConfig, "sweep key must look like section.key");
  std::vector<SimConfig> configs;
  for (const auto& v : values) {
    config::parse_number(v, "sweep value '" + v + "'");
    configs.push_back(load_source(src, {key + "=" + v}).sim);
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + out + "': " + ec.message());

  std::vector<SimOutcome> outcomes(values.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SimOutcome& o = outcomes[i];
      try {
        o = simulate_into(configs[i], fs::path(out) / sweep_dir_name(key, values[i]), full_state);
      } catch (const Error& e) {
        o.status = exit_for(e);
        o.message = e.what();
      }
      std::lock_guard lock(log_mutex);
      spdlog::info("{} = {}: {}", key, values[i], o.status == kOk ? "ok" : o.message);
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "value,status,norm_e,norm_Ahat_err,norm_K_err,care_residual,P_gap_final,P_gap_sup_after_burn_in,"
         "peak_norm_x_last_window,violations,message\n";
  int status = kOk;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const SimOutcome& o = outcomes[i];
    const Metrics& m = o.summary.final_metrics;
    std::string msg = o.message;
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    const char* st = o.status == kOk ? "ok" : (o.status == kDiverged ? "diverged" : "failed");
    csv << io::format_double(config::parse_number(values[i])) << ',' << st << ',' << io::format_double(m.norm_e) << ','
        << io::format_double(m.norm_ahat_err) << ',' << io::format_double(m.norm_k_err) << ','
        << io::format_double(m.care_residual) << ',' << io::format_double(m.p_gap) << ','
        << io::format_double(o.summary.p_gap_sup_after_burn_in) << ','
        << io::format_double(o.summary.peak_norm_x_last_window) << ',' << o.summary.invariants.total() << ',' << msg
        << '\n';
    if (o.status != kOk && status == kOk) status = o.status;
  }
  write_file(fs::path(out) / "sweep_summary.csv", csv.str());
  return status;
}

void print_matrix(const char* name, const Mat& m) {
  std::cout << name << " =\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::cout << "  [";
    // Adding zero prints a signed zero as 0.
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::cout << (j ? ", " : "") << io::format_double(m(i, j) + 0.0);
    std::cout << "]\n";
  }
}

int cmd_care(const Source& src, const std::string& a_txt, const std::string& b_txt, const std::string& q_txt,
             const std::string& r_txt) {
  Mat a, b, q, r;
  if (!a_txt.empty() || !b_txt.empty()) {
    if (a_txt.empty() || b_txt.empty()) throw Error(ErrorCode::kConfig, "--A and --B go together");
    a = config::parse_matrix(a_txt, 0, 0, "--A");
    b = config::parse_matrix(b_txt, static_cast<int>(a.rows()), 0, "--B");
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(b.cols());
    q = config::parse_matrix(q_txt.empty() ? "eye" : q_txt, n, n, "--Q");
    r = config::parse_matrix(r_txt.empty() ? "eye" : r_txt, m, m, "--R");
  } else {
    const config::Loaded loaded = load_source(src);
    a = loaded.sim.plant.a_at(0.0);
    b = loaded.sim.plant.b();
    q = q_txt.empty() ? loaded.sim.q : config::parse_matrix(q_txt, static_cast<int>(a.rows()), static_cast<int>(a.rows()), "--Q");
    r = r_txt.empty() ? loaded.sim.r : config::parse_matrix(r_txt, static_cast<int>(b.cols()), static_cast<int>(b.cols()), "--R");
  }
  const LqrCost cost(b, q, r);
  const CarSolution sol = solve_care(a, cost);
  print_matrix("P", sol.p);
  print_matrix("K", sol.k);
  const bool hurwitz = is_hurwitz(Mat(a + b * sol.k));
  std::cout << "residual = " << io::format_double(sol.residual) << '\n'
            << "iterations = " << sol.iterations << '\n'
            << "closed_loop_hurwitz = " << (hurwitz ? "true" : "false") << '\n';
  return hurwitz ? kOk : kSolverError;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"MR-ARL experiment runner"};
  app.require_subcommand(1);

  Source src;
  auto add_source = [&](CLI::App* sub) {
    sub->add_option("--config", src.config_path, "Config file");
    sub->add_option("--preset", src.preset, "Built-in preset")->check(CLI::IsMember(config::preset_names()));
    sub->add_option("--override", src.overrides, "section.key=value (repeatable)");
  };

  std::string out_dir = "out";
  bool full_state = false;
  auto* sim = app.add_subcommand("simulate", "Run one simulation");
  add_source(sim);
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_flag("--full-state", full_state, "Also write states.csv");

  auto* val = app.add_subcommand("validate", "Check the assumptions for a config");
  add_source(val);

  std::string key;
  std::vector<std::string> values;
  int workers = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a config over several values of one key");
  add_source(sweep);
  sweep->add_option("--key", key, "section.key to vary")->required();
  sweep->add_option("--values", values, "Values (space or comma separated)")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--workers", workers, "Concurrent simulations")->check(CLI::PositiveNumber);
  sweep->add_flag("--full-state", full_state, "Also write states.csv");

  std::string a_txt, b_txt, q_txt, r_txt;
  auto* care = app.add_subcommand("care", "Solve the algebraic Riccati equation once");
  add_source(care);
  care->add_option("--A", a_txt, "State matrix, e.g. [[0]]");
  care->add_option("--B", b_txt, "Input matrix");
  care->add_option("--Q", q_txt, "State weight (default eye)");
  care->add_option("--R", r_txt, "Input weight (default eye)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(src, out_dir, full_state);
    if (val->parsed()) return cmd_validate(src);
    if (sweep->parsed()) return cmd_sweep(src, key, values, out_dir, full_state, workers);
    if (care->parsed()) return cmd_care(src, a_txt, b_txt, q_txt, r_txt);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  }
  return kOk;
}
