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

// Experiment configuration: a sectioned key-value text format.
//
//   # comment
//   [gains]
//   gamma = 200
//   [plant]
//   omega0 = 2*pi*70.8          # products/quotients of numbers and `pi`
//   A = [[0, 1], [-2, -3]]      # row-major; may continue over several lines
//   [weights]
//   Q = eye                     # identity of the matching size
//
// Unknown sections and keys are rejected. Keys left out take their default
// and, where the default is a modelling choice, produce a notice.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mrarl/error.hpp"
#include "mrarl/matlin.hpp"
#include "mrarl/plant.hpp"
#include "mrarl/sim.hpp"

namespace mrarl::config {

/// Section -> key -> raw value text, plus the line each key came from.
struct Document {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::map<std::string, int> lines;  // "section.key" -> source line (0 for overrides)
  std::string origin = "<config>";

  bool has(const std::string& section, const std::string& key) const {
    auto it = sections.find(section);
    return it != sections.end() && it->second.count(key) > 0;
  }
  const std::string& get(const std::string& section, const std::string& key) const {
    return sections.at(section).at(key);
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] inline void fail(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::kConfig, where + ": " + msg);
}

inline int bracket_depth(std::string_view s) {
  int d = 0;
  for (char c : s) {
    if (c == '[') ++d;
    if (c == ']') --d;
  }
  return d;
}

inline double parse_factor(std::string_view f, const std::string& where) {
  std::string t = trim(f);
  double sign = 1.0;
  while (!t.empty() && (t[0] == '-' || t[0] == '+')) {
    if (t[0] == '-') sign = -sign;
    t = trim(std::string_view(t).substr(1));
  }
  if (t.empty()) fail(where, "empty number");
  if (lower(t) == "pi") return sign * M_PI;
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) fail(where, "not a number: '" + t + "'");
  return sign * v;
}

}  // namespace detail

/// Number expression: factors joined by '*' or '/', evaluated left to right.
/// A factor is a decimal literal or `pi`, optionally signed.
inline double parse_number(std::string_view text, const std::string& where = "value") {
  const std::string s = detail::trim(text);
  if (s.empty()) detail::fail(where, "empty value");
  double acc = 0.0;
  char op = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    const bool end = i == s.size();
    // An exponent sign (1e-4) is part of the literal, not an operator.
    if (!end && s[i] != '*' && s[i] != '/') continue;
    const double f = detail::parse_factor(std::string_view(s).substr(start, i - start), where);
    if (op == 0) {
      acc = f;
    } else if (op == '*') {
      acc *= f;
    } else {
      acc /= f;
    }
    if (!end) op = s[i];
    start = i + 1;
  }
  if (!std::isfinite(acc)) detail::fail(where, "value is not finite");
  return acc;
}

/// "[a, b, c]"
inline std::vector<double> parse_vector(std::string_view text, const std::string& where = "value") {
  const std::string s = detail::trim(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') detail::fail(where, "expected [a, b, ...]");
  const std::string body = detail::trim(std::string_view(s).substr(1, s.size() - 2));
  std::vector<double> out;
  if (body.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      out.push_back(parse_number(std::string_view(body).substr(start, i - start), where));
      start = i + 1;
    } else if (body[i] == '[' || body[i] == ']') {
      detail::fail(where, "nested brackets in a vector");
    }
  }
  return out;
}

/// "[[a, b], [c, d]]" row-major, or `eye` / `zeros` when the shape is known.
inline Mat parse_matrix(std::string_view text, int rows, int cols, const std::string& where = "value") {
  const std::string s = detail::trim(text);
  const std::string key = detail::lower(s);
  if (key == "eye" || key == "zeros") {
    if (rows <= 0 || cols <= 0) detail::fail(where, "'" + key + "' needs a known shape");
    if (key == "eye") {
      if (rows != cols) detail::fail(where, "'eye' needs a square shape");
      return Mat::Identity(rows, cols);
    }
    return Mat::Zero(rows, cols);
  }
  if (s.size() < 4 || s.front() != '[' || s.back() != ']') detail::fail(where, "expected [[...], ...]");
  const std::string body = detail::trim(std::string_view(s).substr(1, s.size() - 2));
  std::vector<std::vector<double>> rows_v;
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ',')) ++i;
    if (i >= body.size()) break;
    if (body[i] != '[') detail::fail(where, "expected '[' starting a row");
    const std::size_t close = body.find(']', i);
    if (close == std::string::npos) detail::fail(where, "unterminated row");
    rows_v.push_back(parse_vector(std::string_view(body).substr(i, close - i + 1), where));
    i = close + 1;
  }
  if (rows_v.empty()) detail::fail(where, "empty matrix");
  const std::size_t c = rows_v[0].size();
  std::vector<double> flat;
  for (const auto& r : rows_v) {
    if (r.size() != c) detail::fail(where, "ragged matrix rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  const int nr = static_cast<int>(rows_v.size());
  const int nc = static_cast<int>(c);
  if ((rows > 0 && nr != rows) || (cols > 0 && nc != cols)) {
    detail::fail(where, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix, got " +
                            std::to_string(nr) + "x" + std::to_string(nc));
  }
  try {
    return make_matrix(nr, nc, flat);
  } catch (const Error& e) {
    detail::fail(where, e.what());
  }
}

inline bool parse_bool(std::string_view text, const std::string& where = "value") {
  const std::string s = detail::lower(detail::trim(text));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  detail::fail(where, "expected true/false");
}

inline Document parse_document(std::string_view text, std::string origin = "<config>") {
  Document doc;
  doc.origin = origin;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto strip_comment = [](std::string s) {
      const auto h = s.find('#');
      if (h != std::string::npos) s.resize(h);
      if (!s.empty() && s.back() == '\r') s.pop_back();
      return detail::trim(s);
    };
    std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = detail::lower(detail::trim(std::string_view(line).substr(1, line.size() - 2)));
      if (section.empty()) detail::fail(where, "empty section name");
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) detail::fail(where, "expected key = value");
    if (section.empty()) detail::fail(where, "key outside of any [section]");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) detail::fail(where, "empty key");
    while (detail::bracket_depth(value) > 0 && std::getline(in, raw)) {
      ++lineno;
      value += " " + strip_comment(raw);
    }
    if (detail::bracket_depth(value) != 0) detail::fail(where, "unbalanced brackets in '" + key + "'");
    if (doc.sections[section].count(key)) detail::fail(where, "duplicate key '" + key + "'");
    doc.sections[section][key] = value;
    doc.lines[section + "." + key] = lineno;
  }
  return doc;
}

/// "section.key=value"; replaces or adds the key.
inline void apply_override(Document& doc, std::string_view spec) {
  const std::string s = detail::trim(spec);
  const auto eq = s.find('=');
  const auto dot = s.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw Error(ErrorCode::kConfig, "override '" + s + "' must look like section.key=value");
  }
  const std::string section = detail::lower(detail::trim(std::string_view(s).substr(0, dot)));
  const std::string key = detail::trim(std::string_view(s).substr(dot + 1, eq - dot - 1));
  doc.sections[section][key] = detail::trim(std::string_view(s).substr(eq + 1));
  doc.lines[section + "." + key] = 0;
}

// ---------------------------------------------------------------------------

struct Loaded {
  SimConfig sim;
  std::vector<std::string> notices;
};

namespace detail {

// Tracks which keys of a section were consumed; leftovers are rejected.
class SectionReader {
 public:
  SectionReader(const Document& doc, std::string name, std::vector<std::string>& notices)
      : doc_(doc), name_(std::move(name)), notices_(notices) {
    auto it = doc.sections.find(name_);
    if (it != doc.sections.end()) entries_ = &it->second;
  }

  bool has(const std::string& key) const { return entries_ && entries_->count(key); }

  std::string where(const std::string& key) const {
    auto it = doc_.lines.find(name_ + "." + key);
    const int line = it == doc_.lines.end() ? 0 : it->second;
    return doc_.origin + (line > 0 ? ":" + std::to_string(line) : std::string(" (override)")) + " [" + name_ +
           "] " + key;
  }

  const std::string& raw(const std::string& key) {
    used_.push_back(key);
    return entries_->at(key);
  }

  double number(const std::string& key, double fallback, bool notice = false) {
    if (!has(key)) {
      if (notice) notices_.push_back("[" + name_ + "] " + key + " not set; using default " + fmt(fallback));
      return fallback;
    }
    return parse_number(raw(key), where(key));
  }

  double required_number(const std::string& key) {
    if (!has(key)) fail(doc_.origin, "[" + name_ + "] " + key + " is required");
    return parse_number(raw(key), where(key));
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const double v = parse_number(raw(key), where(key));
    if (v != std::floor(v) || std::abs(v) > 2e9) fail(where(key), "expected an integer");
    return static_cast<int>(v);
  }

  std::string word(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    return lower(trim(raw(key)));
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    return parse_bool(raw(key), where(key));
  }

  std::optional<Vec> vector(const std::string& key, int n) {
    if (!has(key)) return std::nullopt;
    const std::string& r = raw(key);
    if (lower(trim(r)) == "zeros") return Vec::Zero(n);
    const std::vector<double> v = parse_vector(r, where(key));
    if (static_cast<int>(v.size()) != n) fail(where(key), "expected " + std::to_string(n) + " entries");
    Vec out(n);
    for (int i = 0; i < n; ++i) out(i) = v[static_cast<std::size_t>(i)];
    return out;
  }

  std::optional<Mat> matrix(const std::string& key, int rows, int cols) {
    if (!has(key)) return std::nullopt;
    return parse_matrix(raw(key), rows, cols, where(key));
  }

  void finish() const {
    if (!entries_) return;
    for (const auto& [k, v] : *entries_) {
      bool seen = false;
      for (const auto& u : used_) seen = seen || u == k;
      if (!seen) fail(where(k), "unknown key");
    }
  }

  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  }

 private:
  const Document& doc_;
  std::string name_;
  std::vector<std::string>& notices_;
  const std::map<std::string, std::string>* entries_ = nullptr;
  std::vector<std::string> used_;
};

}  // namespace detail

inline const std::vector<std::string>& known_sections() {
  static const std::vector<std::string> s{"plant", "weights", "uncertainty", "gains", "dither", "sim", "drift"};
  return s;
}

/// Builds and validates a SimConfig from a document.
inline Loaded build(const Document& doc) {
  for (const auto& [name, _] : doc.sections) {
    bool ok = false;
    for (const auto& k : known_sections()) ok = ok || k == name;
    if (!ok) detail::fail(doc.origin, "unknown section [" + name + "]");
  }
  Loaded out;
  SimConfig& cfg = out.sim;
  std::vector<std::string>& notes = out.notices;

  // [plant]
  detail::SectionReader plant(doc, "plant", notes);
  const std::string model = plant.word("model", "dfim");
  std::optional<DfimParams> dfim;
  LtiPlant lti;
  if (model == "dfim") {
    DfimParams p;
    p.l1 = plant.required_number("L1");
    p.l2 = plant.required_number("L2");
    p.lm = plant.required_number("Lm");
    p.r1 = plant.required_number("R1");
    p.r2 = plant.required_number("R2");
    p.omega0 = plant.required_number("omega0");
    p.omegar = plant.required_number("omegar");
    p.pole_pairs = plant.number("pole_pairs", 0.0);
    dfim = p;
  } else if (model == "lti") {
    auto a = plant.matrix("A", 0, 0);
    if (!a) detail::fail(doc.origin, "[plant] A is required for model = lti");
    auto b = plant.matrix("B", static_cast<int>(a->rows()), 0);
    if (!b) detail::fail(doc.origin, "[plant] B is required for model = lti");
    lti = {*a, *b};
  } else {
    detail::fail(plant.where("model"), "expected 'dfim' or 'lti'");
  }
  plant.finish();

  // [drift]
  detail::SectionReader drift(doc, "drift", notes);
  std::optional<DriftSchedule> schedule;
  if (drift.flag("enabled", false)) {
    if (!dfim) detail::fail(doc.origin, "[drift] requires [plant] model = dfim");
    DriftSchedule s;
    s.temperature.total = drift.number("delta_T", s.temperature.total);
    s.temperature.duration = drift.number("temp_duration", s.temperature.duration);
    s.temperature.center = drift.number("temp_center", s.temperature.center, true);
    s.alpha = drift.number("alpha", s.alpha);
    s.speed.total = drift.number("delta_omegar", s.speed.total);
    s.speed.duration = drift.number("speed_duration", s.speed.duration);
    s.speed.center = drift.number("speed_center", s.speed.center, true);
    schedule = s;
  } else {
    for (const char* k : {"delta_T", "temp_duration", "temp_center", "alpha", "delta_omegar", "speed_duration",
                          "speed_center"}) {
      if (drift.has(k)) drift.raw(k);
    }
  }
  drift.finish();

  try {
    cfg.plant = dfim ? PlantModel::dfim(*dfim, schedule) : PlantModel::lti(lti);
  } catch (const Error& e) {
    detail::fail(doc.origin, e.what());
  }
  const int n = cfg.n();
  const int m = cfg.m();

  // [weights]
  detail::SectionReader weights(doc, "weights", notes);
  auto q = weights.matrix("Q", n, n);
  auto r = weights.matrix("R", m, m);
  if (!q) notes.push_back("[weights] Q not set; using the identity (a modelling assumption, not a given)");
  if (!r) notes.push_back("[weights] R not set; using the identity (a modelling assumption, not a given)");
  cfg.q = q.value_or(Mat::Identity(n, n));
  cfg.r = r.value_or(Mat::Identity(m, m));
  weights.finish();

  // [uncertainty]
  detail::SectionReader unc(doc, "uncertainty", notes);
  const double radius = unc.required_number("radius");
  Mat center;
  if (auto c = unc.matrix("center", n, n)) {
    center = *c;
    for (const char* k : {"R1", "R2", "omegar", "r1", "r2", "r_omega"})
      if (unc.has(k)) detail::fail(unc.where(k), "not allowed together with 'center'");
  } else if (dfim) {
    DfimParams nominal = *dfim;
    nominal.r1 = unc.number("R1", dfim->r1, true);
    nominal.r2 = unc.number("R2", dfim->r2, true);
    nominal.omegar = unc.number("omegar", dfim->omegar);
    center = dfim_matrices(nominal).a;
    DfimRanges ranges{nominal.r1, unc.number("r1", 0.0), nominal.r2, unc.number("r2", 0.0), nominal.omegar,
                      unc.number("r_omega", 0.0)};
    if (unc.has("r1") || unc.has("r2") || unc.has("r_omega")) cfg.dfim_ranges = ranges;
  } else {
    detail::fail(doc.origin, "[uncertainty] center is required for model = lti");
  }
  cfg.uncertainty = UncertaintySpec::ball(center, radius);
  cfg.uncertainty.boundary_layer = unc.number("boundary_layer", radius / 100.0);
  unc.finish();

  // [gains]
  detail::SectionReader gains(doc, "gains", notes);
  const Gains defaults;
  cfg.gains.lambda = gains.number("lambda", defaults.lambda, true);
  cfg.gains.gamma = gains.number("gamma", defaults.gamma, true);
  cfg.gains.nu = gains.number("nu", defaults.nu, true);
  cfg.gains.g = gains.number("g", defaults.g, true);
  cfg.gains.mu = gains.number("mu", defaults.mu, true);
  gains.finish();

  // [dither]
  detail::SectionReader dither(doc, "dither", notes);
  cfg.dither.amplitude = dither.number("amplitude", cfg.dither.amplitude);
  cfg.dither.omega_s = dither.number("omega_s", cfg.dither.omega_s);
  cfg.dither.terms_per_channel = dither.integer("terms", cfg.dither.terms_per_channel);
  cfg.dither.channels = dither.integer("channels", m);
  const std::string wave = dither.word("waveform", "triangular");
  if (wave == "triangular") {
    cfg.dither.waveform = Waveform::kTriangular;
  } else if (wave == "sine" || wave == "sinusoidal") {
    cfg.dither.waveform = Waveform::kSinusoidal;
  } else {
    detail::fail(dither.where("waveform"), "expected 'triangular' or 'sine'");
  }
  dither.finish();

  // [sim]
  detail::SectionReader sim(doc, "sim", notes);
  const std::string mode = sim.word("mode", "full");
  if (mode == "full") {
    cfg.mode = SimMode::kFull;
  } else if (mode == "reduced") {
    cfg.mode = SimMode::kReduced;
  } else {
    detail::fail(sim.where("mode"), "expected 'full' or 'reduced'");
  }
  cfg.dt = sim.number("dt", cfg.dt);
  cfg.t_final = sim.number("t_final", cfg.t_final);
  cfg.log_stride = sim.integer("log_stride", cfg.log_stride);
  cfg.substeps = sim.integer("substeps", cfg.substeps);
  cfg.seed = static_cast<unsigned>(sim.integer("seed", static_cast<int>(cfg.seed)));
  cfg.pe_window = sim.number("pe_window", cfg.pe_window);
  cfg.theta_samples = sim.integer("theta_samples", cfg.theta_samples);
  cfg.skip_assumption_check = sim.flag("skip_assumption_check", false);
  cfg.init.x = sim.vector("x0", n);
  cfg.init.xm = sim.vector("xm0", n);
  cfg.init.xi = sim.vector("xi0", n);
  cfg.init.zeta = sim.vector("zeta0", n);
  cfg.init.a_hat = sim.matrix("Ahat0", n, n);
  cfg.init.p_hat = sim.matrix("Phat0", n, n);
  cfg.init.k_a = sim.matrix("Ka0", m, n);
  sim.finish();

  validate_config(cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Presets.

inline constexpr std::string_view kPresetExample1 = R"(# DFIM at constant speed, unknown stator and rotor resistances.
[plant]
model = dfim
L1 = 0.02645
L2 = 0.0264
Lm = 0.0257
R1 = 0.036
R2 = 0.038
omega0 = 2*pi*70.8
omegar = 2*pi*62
pole_pairs = 3

[weights]
# Not given with the motor data; identity weights are an assumption.
Q = eye
R = eye

[uncertainty]
R1 = 0.03
R2 = 0.03
r1 = 0.01
r2 = 0.01
radius = 20

[gains]
lambda = 2
gamma = 200
nu = 1
g = 100
mu = 50

[dither]
amplitude = 10
omega_s = 0.2
terms = 4
waveform = triangular

[sim]
mode = full
dt = 1e-4
t_final = 200
log_stride = 100
seed = 1
)";

inline constexpr std::string_view kPresetExample2 = R"(# DFIM with copper heating and a rotor speed step; wide uncertainty set.
[plant]
model = dfim
L1 = 0.02645
L2 = 0.0264
Lm = 0.0257
R1 = 0.036
R2 = 0.038
omega0 = 2*pi*70.8
omegar = 2*pi*62
pole_pairs = 3

[weights]
Q = eye
R = eye

[uncertainty]
R1 = 0.2
R2 = 0.2
omegar = 2*pi*70
r1 = 0.18
r2 = 0.18
r_omega = 2*pi*15
radius = 4830

[gains]
lambda = 2
gamma = 1000
nu = 1
g = 10
mu = 50

[dither]
amplitude = 10
omega_s = 0.2
terms = 4
waveform = triangular

[drift]
enabled = true
delta_T = 80
temp_duration = 600
temp_center = 400
alpha = 4.041e-3
delta_omegar = 2*pi*20
speed_duration = 60
speed_center = 300

[sim]
mode = full
dt = 1e-4
t_final = 1000
log_stride = 1000
seed = 1
)";

inline constexpr std::string_view kPresetScalarSanity = R"(# x' = u with q = r = 1: P* = 1, K* = -1. Learning disabled.
[plant]
model = lti
A = [[0]]
B = [[1]]

[weights]
Q = [[1]]
R = [[1]]

[uncertainty]
center = [[0]]
radius = 1

[gains]
lambda = 10
gamma = 0
nu = 1
g = 1
mu = 0

[dither]
amplitude = 1
omega_s = 0.2
terms = 4
waveform = triangular

[sim]
mode = full
dt = 1e-3
t_final = 50
log_stride = 10
Phat0 = [[0]]
)";

inline std::vector<std::string> preset_names() { return {"example1", "example2", "scalar-sanity"}; }

inline std::string_view preset_text(std::string_view name) {
  if (name == "example1") return kPresetExample1;
  if (name == "example2") return kPresetExample2;
  if (name == "scalar-sanity") return kPresetScalarSanity;
  throw Error(ErrorCode::kConfig, "unknown preset '" + std::string(name) + "'");
}

inline Document preset_document(std::string_view name) {
  return parse_document(preset_text(name), "preset:" + std::string(name));
}

inline Document file_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str(), path);
}

inline Loaded load(Document doc, const std::vector<std::string>& overrides = {}) {
  for (const auto& o : overrides) apply_override(doc, o);
  return build(doc);
}

}  // namespace mrarl::config
