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
#include <sstream>
#include <string>

#include "mrarl/config.hpp"
#include "mrarl/io.hpp"

namespace mrarl {
namespace {

using config::Document;

void expect_config_error(auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig) << e.what();
  }
}

TEST(ParseNumber, Expressions) {
  EXPECT_EQ(config::parse_number("2*pi*70.8"), 2 * M_PI * 70.8);
  EXPECT_EQ(config::parse_number(" -3 "), -3.0);
  EXPECT_EQ(config::parse_number("1e-4"), 1e-4);
  EXPECT_EQ(config::parse_number("pi/2"), M_PI / 2);
  EXPECT_EQ(config::parse_number("-pi"), -M_PI);
  EXPECT_EQ(config::parse_number("4.041e-3"), 4.041e-3);
  expect_config_error([] { config::parse_number("abc"); });
  expect_config_error([] { config::parse_number(""); });
  expect_config_error([] { config::parse_number("1/0"); });
  expect_config_error([] { config::parse_number("2**3"); });
}

TEST(ParseMatrix, ShapesAndKeywords) {
  EXPECT_EQ(config::parse_matrix("eye", 3, 3), Mat::Identity(3, 3));
  EXPECT_EQ(config::parse_matrix("zeros", 2, 3), Mat::Zero(2, 3));
  const Mat m = config::parse_matrix("[[1, 2], [3, 4*pi]]", 0, 0);
  EXPECT_EQ(m(0, 1), 2.0);
  EXPECT_EQ(m(1, 1), 4 * M_PI);
  expect_config_error([] { config::parse_matrix("[[1, 2], [3]]", 0, 0); });
  expect_config_error([] { config::parse_matrix("[[1, 2]]", 2, 2); });
  expect_config_error([] { config::parse_matrix("eye", 2, 3); });
  expect_config_error([] { config::parse_matrix("[1, 2]", 0, 0); });
}

TEST(ParseDocument, CommentsContinuationAndDuplicates) {
  const Document d = config::parse_document(
      "# header\n[Plant]\nmodel = lti   # trailing\nA = [[1, 0],\n     [0, 1]]\n\n[weights]\nR = [[2]]\n");
  EXPECT_EQ(d.get("plant", "model"), "lti");
  EXPECT_EQ(config::parse_matrix(d.get("plant", "A"), 2, 2), Mat::Identity(2, 2));
  EXPECT_EQ(d.lines.at("weights.R"), 8);
  expect_config_error([] { config::parse_document("[a]\nx = 1\nx = 2\n"); });
  expect_config_error([] { config::parse_document("x = 1\n"); });
  expect_config_error([] { config::parse_document("[a]\nnot a pair\n"); });
  expect_config_error([] { config::parse_document("[a]\nA = [[1, 2]\n"); });
}

TEST(Build, UnknownKeysAndSectionsRejected) {
  const std::string base(config::preset_text("scalar-sanity"));
  expect_config_error([&] { config::load(config::parse_document(base + "\n[extra]\nx = 1\n")); });
  expect_config_error([&] { config::load(config::parse_document(base), {"gains.lamda=3"}); });
  expect_config_error([&] { config::load(config::parse_document(base), {"sim.mode=fast"}); });
  expect_config_error([&] { config::load(config::parse_document(base), {"plant.A=[[1, 2]]"}); });
  expect_config_error([&] { config::load(config::parse_document(base), {"nodot=1"}); });
}

TEST(Build, OverridesReplaceValues) {
  const config::Loaded l = config::load(config::preset_document("example1"), {"gains.gamma=7", "sim.t_final=3"});
  EXPECT_EQ(l.sim.gains.gamma, 7.0);
  EXPECT_EQ(l.sim.t_final, 3.0);
}

TEST(Build, DefaultsAreAnnounced) {
  const config::Loaded l = config::load(config::parse_document(
      "[plant]\nmodel = lti\nA = [[0]]\nB = [[1]]\n[uncertainty]\ncenter = [[0]]\nradius = 1\n"));
  bool q = false, lambda = false;
  for (const auto& n : l.notices) {
    q = q || n.find("[weights] Q") != std::string::npos;
    lambda = lambda || n.find("[gains] lambda") != std::string::npos;
  }
  EXPECT_TRUE(q);
  EXPECT_TRUE(lambda);
  EXPECT_EQ(l.sim.gains.lambda, Gains{}.lambda);
  EXPECT_EQ(l.sim.q, Mat::Identity(1, 1));
}

TEST(Build, DriftRequiresMotorModel) {
  expect_config_error([] {
    config::load(config::parse_document("[plant]\nmodel = lti\nA = [[0]]\nB = [[1]]\n[uncertainty]\ncenter = "
                                        "[[0]]\nradius = 1\n[drift]\nenabled = true\n"));
  });
}

// The presets must encode the reference motor data and uncertainty ranges digit for digit.
TEST(Presets, FirstScenarioValues) {
  const SimConfig c = config::load(config::preset_document("example1")).sim;
  const DfimParams p = *c.plant.dfim_params();
  EXPECT_EQ(p.l1, 0.02645);
  EXPECT_EQ(p.l2, 0.0264);
  EXPECT_EQ(p.lm, 0.0257);
  EXPECT_EQ(p.r1, 0.036);
  EXPECT_EQ(p.r2, 0.038);
  EXPECT_EQ(p.omega0, 2 * M_PI * 70.8);
  EXPECT_EQ(p.omegar, 2 * M_PI * 62);
  EXPECT_EQ(p.pole_pairs, 3.0);
  EXPECT_FALSE(c.plant.time_varying());
  DfimParams nominal = p;
  nominal.r1 = 0.03;
  nominal.r2 = 0.03;
  EXPECT_EQ(c.uncertainty.center, dfim_matrices(nominal).a);
  EXPECT_EQ(c.uncertainty.radius, 20.0);
  ASSERT_TRUE(c.dfim_ranges.has_value());
  EXPECT_EQ(c.dfim_ranges->r1_radius, 0.01);
  EXPECT_EQ(c.dfim_ranges->r2_radius, 0.01);
  EXPECT_EQ(c.dither.amplitude, 10.0);
  EXPECT_EQ(c.dither.omega_s, 0.2);
  EXPECT_EQ(c.dither.waveform, Waveform::kTriangular);
  EXPECT_EQ(c.dt, 1e-4);
  EXPECT_EQ(c.t_final, 200.0);
}

TEST(Presets, SecondScenarioValues) {
  const SimConfig c = config::load(config::preset_document("example2")).sim;
  const DfimParams p = *c.plant.dfim_params();
  EXPECT_EQ(p.r1, 0.036);
  EXPECT_EQ(p.omegar, 2 * M_PI * 62);
  DfimParams nominal = p;
  nominal.r1 = 0.2;
  nominal.r2 = 0.2;
  nominal.omegar = 2 * M_PI * 70;
  EXPECT_EQ(c.uncertainty.center, dfim_matrices(nominal).a);
  EXPECT_EQ(c.uncertainty.radius, 4830.0);
  ASSERT_TRUE(c.dfim_ranges.has_value());
  EXPECT_EQ(c.dfim_ranges->r1_radius, 0.18);
  EXPECT_EQ(c.dfim_ranges->r2_radius, 0.18);
  EXPECT_EQ(c.dfim_ranges->omegar_radius, 2 * M_PI * 15);
  ASSERT_TRUE(c.plant.drift().has_value());
  const DriftSchedule& d = *c.plant.drift();
  EXPECT_EQ(d.temperature.total, 80.0);
  EXPECT_EQ(d.temperature.duration, 600.0);
  EXPECT_EQ(d.speed.total, 2 * M_PI * 20);
  EXPECT_EQ(d.speed.duration, 60.0);
  EXPECT_EQ(d.alpha, 4.041e-3);
}

TEST(Presets, ScalarSanityAndUnknownName) {
  const SimConfig c = config::load(config::preset_document("scalar-sanity")).sim;
  EXPECT_EQ(c.plant.a_at(0.0), Mat::Zero(1, 1));
  EXPECT_EQ(c.gains.gamma, 0.0);
  EXPECT_EQ(*c.init.p_hat, Mat::Zero(1, 1));
  expect_config_error([] { config::preset_text("example3"); });
}

// --- CSV and summary --------------------------------------------------------

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.0, -0.0, 1.0 / 3.0, M_PI * 1e-300, 1.7976931348623157e308, 4.9e-324, -123456.789}) {
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_TRUE(std::isnan(io::parse_double(io::format_double(NAN))));
  EXPECT_EQ(io::parse_double(io::format_double(-INFINITY)), -INFINITY);
  EXPECT_THROW(io::parse_double("1.0x"), Error);
}

TEST(MetricsCsv, RoundTripAndShape) {
  const SimConfig cfg = config::load(config::preset_document("scalar-sanity"), {"sim.t_final=2"}).sim;
  const RunResult run_result = run(cfg);
  std::stringstream ss;
  io::write_metrics_csv(ss, run_result.trajectory);
  const std::string text = ss.str();
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "t,norm_e,norm_Ahat_err,norm_K_err,care_residual,V_A,V_e,V_m,norm_Adot,pe_margin_xm,dither_amp");
  const io::CsvTable t = io::read_csv(ss);
  ASSERT_EQ(t.rows.size(), run_result.trajectory.records.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::vector<double> expect = io::metrics_row(run_result.trajectory.records[i]);
    for (std::size_t j = 0; j < expect.size(); ++j) {
      if (std::isnan(expect[j])) {
        EXPECT_TRUE(std::isnan(t.rows[i][j]));
      } else {
        EXPECT_NEAR(t.rows[i][j], expect[j], 1e-12 * (1.0 + std::abs(expect[j])));
      }
    }
  }
  EXPECT_EQ(t.column("norm_K_err"), 3u);
  EXPECT_THROW(t.column("missing"), Error);
}

TEST(StatesCsv, ColumnCountMatchesHeader) {
  const SimConfig cfg = config::load(config::preset_document("scalar-sanity"), {"sim.t_final=0.1"}).sim;
  const RunResult r = run(cfg);
  std::stringstream ss;
  io::write_states_csv(ss, r.trajectory, 1, 1);
  const io::CsvTable t = io::read_csv(ss);
  EXPECT_EQ(t.header.size(), io::states_columns(1, 1).size());
  EXPECT_EQ(t.header[1], "x_1");
  EXPECT_EQ(t.rows.size(), r.trajectory.records.size());
}

TEST(ReadCsv, RejectsRaggedRows) {
  std::stringstream ss("a,b\n1,2\n3\n");
  EXPECT_THROW(io::read_csv(ss), Error);
}

TEST(Summary, ReportsWindowStatistics) {
  const SimConfig cfg = config::load(config::preset_document("scalar-sanity"), {"sim.t_final=30"}).sim;
  const RunResult r = run(cfg);
  const io::RunSummary s = io::summarize(r, cfg);
  EXPECT_NEAR(s.duration, 30.0, 1e-9);
  EXPECT_GT(s.pe_margin_last_window, 0.0);
  EXPECT_GT(s.peak_norm_x_last_window, 0.0);
  EXPECT_LT(s.p_gap_sup_after_burn_in, 0.2);
  std::stringstream ss;
  io::write_summary(ss, s);
  EXPECT_NE(ss.str().find("violations.total = 0\n"), std::string::npos);
  EXPECT_NE(ss.str().find("final.norm_K_err = "), std::string::npos);
}

}  // namespace
}  // namespace mrarl
