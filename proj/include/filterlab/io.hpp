// Copyright 2026 The filterlab Authors
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

// JSON and CSV readers and writers for models, graphs, scenarios, solver
// output and experiment results. Numbers are written with 17 significant
// digits so that a write/read cycle reproduces every double exactly.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "filterlab/errors.hpp"
#include "filterlab/gap_analysis.hpp"
#include "filterlab/harness.hpp"
#include "filterlab/network.hpp"
#include "filterlab/periodic_core.hpp"
#include "filterlab/spps.hpp"

namespace filterlab::io {

using nlohmann::json;

// Shortest round-trip form is not needed; %.17g is exact for doubles.
// NaN is written as an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline json parse_json(const std::string& text, const std::string& origin = "<input>") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline json load_json(const std::string& path) { return parse_json(read_text_file(path), path); }

using CsvTable = std::vector<std::vector<std::string>>;

// Comma separated, no quoting; every writer here emits plain fields.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path)); }

// ---------------------------------------------------------------- matrices

inline json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline int nesting(const json& j) {
  if (j.is_number()) return 0;
  if (!j.is_array()) throw ValidationError("expected a number or an array");
  if (j.empty()) return 1;
  return 1 + nesting(j.front());
}

}  // namespace detail

/// A number (1x1) or a list of rows. `cols` fixes the width of a matrix
/// with no rows, as for a sensor that observes nothing.
inline MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array()) throw ValidationError("matrix must be a number or a list of rows");
  if (j.empty()) return MatrixXd(0, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j.front().is_array()) throw ValidationError("matrix rows must be lists");
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("matrix rows have unequal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ValidationError("matrix entries must be numbers");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

/// Accepts a number, a single matrix (constant sequence), a list of
/// numbers (scalar sequence) or a list of matrices.
inline PeriodicSequence sequence_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const int depth = detail::nesting(j);
  if (depth == 0 || depth == 2) return PeriodicSequence::constant(matrix_from_json(j, cols_if_empty));
  std::vector<MatrixXd> items;
  if (depth == 1) {
    if (j.empty()) throw ValidationError("empty sequence");
    for (const auto& v : j) items.push_back(matrix_from_json(v));
  } else if (depth == 3) {
    for (const auto& v : j) items.push_back(matrix_from_json(v, cols_if_empty));
  } else {
    throw ValidationError("sequence nesting too deep");
  }
  return PeriodicSequence(std::move(items));
}

inline json sequence_to_json(const PeriodicSequence& s) {
  json out = json::array();
  for (const auto& m : s.items()) out.push_back(matrix_to_json(m));
  return out;
}

inline VectorXd vector_from_json(const json& j) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw ValidationError("vector must be a list of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("vector entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// ---------------------------------------------------------------- plant

inline PlantModel plant_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "paper_sec5") return paper_plant();
    throw ValidationError("unknown builtin plant '" + j.get<std::string>() + "'");
  }
  if (!j.is_object()) throw ValidationError("plant must be an object");
  if (j.contains("builtin")) return plant_from_json(j.at("builtin"));
  for (const char* key : {"A", "Q", "sensors"}) {
    if (!j.contains(key)) throw ValidationError(std::string("plant is missing '") + key + "'");
  }
  const auto A = sequence_from_json(j.at("A"));
  const auto Q = sequence_from_json(j.at("Q"));
  if (!j.at("sensors").is_array() || j.at("sensors").empty()) {
    throw ValidationError("plant needs a nonempty 'sensors' list");
  }
  std::vector<SensorModel> sensors;
  for (const auto& s : j.at("sensors")) {
    if (!s.contains("C") || !s.contains("R")) throw ValidationError("each sensor needs 'C' and 'R'");
    sensors.push_back({sequence_from_json(s.at("C"), A.cols()), sequence_from_json(s.at("R"))});
  }
  PlantModel model(A, Q, std::move(sensors));
  if (j.contains("period")) {
    const auto declared = j.at("period").get<std::size_t>();
    if (model.period() % declared != 0) {
      throw ValidationError("declared period " + std::to_string(declared) +
                            " is inconsistent with the data period " + std::to_string(model.period()));
    }
  }
  return model;
}

inline json plant_to_json(const PlantModel& m) {
  json sensors = json::array();
  for (const auto& s : m.sensors()) sensors.push_back({{"C", sequence_to_json(s.C)}, {"R", sequence_to_json(s.R)}});
  return {{"period", m.period()}, {"A", sequence_to_json(m.A())}, {"Q", sequence_to_json(m.Q())},
          {"sensors", sensors}};
}

// ---------------------------------------------------------------- graph

/// `{N, edges: [[i, j], ...], positions}` with 1-based node ids, or a
/// generator: `{"random_geometric": {N, side, radius, seed}}`, or the
/// string "paper" (optionally `{"paper": {"seed": s}}`).
inline SensorGraph graph_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "paper") return paper_graph();
    throw ValidationError("unknown graph shorthand '" + j.get<std::string>() + "'");
  }
  if (!j.is_object()) throw ValidationError("graph must be an object");
  if (j.contains("paper")) return paper_graph(j.at("paper").value("seed", std::uint64_t{8}));
  if (j.contains("random_geometric")) {
    const auto& g = j.at("random_geometric");
    return random_geometric_graph(g.at("N").get<std::size_t>(), g.value("side", 300.0),
                                  g.at("radius").get<double>(), g.value("seed", std::uint64_t{1}));
  }
  if (j.contains("complete")) {
    const auto n = j.at("complete").get<std::size_t>();
    SensorGraph g(n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) g.add_edge(a, b);
    return g;
  }
  if (!j.contains("N")) throw ValidationError("graph is missing 'N'");
  SensorGraph g(j.at("N").get<std::size_t>());
  for (const auto& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2) throw ValidationError("edges must be pairs");
    const auto a = e[0].get<std::size_t>();
    const auto b = e[1].get<std::size_t>();
    if (a < 1 || b < 1) throw ValidationError("edge endpoints are 1-based");
    g.add_edge(a - 1, b - 1);
  }
  if (j.contains("positions")) {
    for (const auto& p : j.at("positions")) g.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    if (g.positions.size() != g.size()) throw ValidationError("one position per node expected");
  }
  return g;
}

inline json graph_to_json(const SensorGraph& g) {
  json edges = json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a + 1, b + 1});
  json out = {{"N", g.size()}, {"edges", edges}};
  if (!g.positions.empty()) {
    json pos = json::array();
    for (const auto& p : g.positions) pos.push_back({p[0], p[1]});
    out["positions"] = pos;
  }
  return out;
}

// FNV-1a over the 1-based edge list, for labelling outputs.
inline std::string graph_hash(const SensorGraph& g) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(g.size());
  for (const auto& [a, b] : g.edges()) {
    mix(a + 1);
    mix(b + 1);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline ConsensusWeights weights_from_json(const json& j, const SensorGraph& g) {
  if (j.is_null()) return metropolis_weights(g);
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "metropolis") return metropolis_weights(g);
    if (s == "averaging") return ConsensusWeights(averaging_weights(g.size()).matrix(), g);
    throw ValidationError("unknown weights shorthand '" + s + "'");
  }
  return ConsensusWeights(matrix_from_json(j), g);
}

inline std::string weights_csv(const ConsensusWeights& w) {
  std::ostringstream out;
  out << "node";
  for (std::size_t j = 0; j < w.size(); ++j) out << ',' << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < w.size(); ++i) {
    out << i + 1;
    for (std::size_t j = 0; j < w.size(); ++j) out << ',' << format_number(w(i, j));
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- scenario

inline Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  if (j.contains("builtin")) {
    if (j.at("builtin") != "paper_sec5") throw ValidationError("unknown builtin scenario");
    auto s = paper_scenario(j.value("graph_seed", std::uint64_t{8}), j.value("seed", std::uint64_t{1}));
    if (j.contains("trials")) s.trials = j.at("trials").get<std::size_t>();
    if (j.contains("horizon")) s.horizon = j.at("horizon").get<std::size_t>();
    if (j.contains("L_values")) s.L_values = j.at("L_values").get<std::vector<std::size_t>>();
    if (j.contains("filters")) {
      s.filters.clear();
      for (const auto& f : j.at("filters")) s.filters.push_back(parse_filter(f.get<std::string>()));
    }
    return s;
  }
  for (const char* key : {"plant", "graph"}) {
    if (!j.contains(key)) throw ValidationError(std::string("scenario is missing '") + key + "'");
  }
  auto plant = plant_from_json(j.at("plant"));
  auto graph = graph_from_json(j.at("graph"));
  auto weights = weights_from_json(j.value("weights", json()), graph);
  Scenario s(std::move(plant), graph, std::move(weights));
  s.L_values = j.contains("L_values") ? j.at("L_values").get<std::vector<std::size_t>>()
                                      : (is_strongly_connected(graph) ? default_L_values(graph)
                                                                      : std::vector<std::size_t>{});
  s.horizon = j.value("horizon", std::size_t{100});
  s.trials = j.value("trials", std::size_t{1500});
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("filters")) {
    s.filters.clear();
    for (const auto& f : j.at("filters")) s.filters.push_back(parse_filter(f.get<std::string>()));
  }
  if (j.contains("x0")) s.x0 = vector_from_json(j.at("x0"));
  if (j.contains("initial_estimate")) s.initial_estimate = vector_from_json(j.at("initial_estimate"));
  if (j.contains("initial_covariance")) s.initial_covariance = matrix_from_json(j.at("initial_covariance"));
  s.noise_scale = j.value("noise_scale", 1.0);
  return s;
}

// ---------------------------------------------------------------- solver output

inline json spps_to_json(const SppsSolution& sol, double tol) {
  json P = json::array();
  for (const auto& m : sol.P) P.push_back(matrix_to_json(m));
  return {{"period", sol.period()}, {"iterations", sol.iterations}, {"residual", sol.residual},
          {"tolerance", tol}, {"P", P}};
}

inline std::string spps_csv(const SppsSolution& sol) {
  std::ostringstream out;
  out << "k,i,j,value\n";
  for (std::size_t k = 0; k < sol.period(); ++k) {
    const auto& P = sol.P[k];
    for (Eigen::Index r = 0; r < P.rows(); ++r)
      for (Eigen::Index c = 0; c < P.cols(); ++c)
        out << k << ',' << r + 1 << ',' << c + 1 << ',' << format_number(P(r, c)) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- results

inline std::string per_step_csv(const TrialResults& res) {
  std::ostringstream out;
  out << "filter,sensor,k,mse_empirical,mse_theory\n";
  for (const auto& s : res.series) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const auto sensor = s.filter == FilterKind::CKF ? 0 : r + 1;
      for (std::size_t k = 1; k <= res.horizon; ++k) {
        out << s.label() << ',' << sensor << ',' << k << ',' << format_number(s.mse(r, k - 1)) << ','
            << format_number(s.theory(r, k - 1)) << '\n';
      }
    }
  }
  return out.str();
}

inline std::string steady_csv(const TrialResults& res) {
  std::ostringstream out;
  out << "filter,sensor,L,mse_i,theory_avg,rate_q,sigma2\n";
  for (const auto& s : res.series) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const bool ckf = s.filter == FilterKind::CKF;
      out << filter_name(s.filter) << ',' << (ckf ? 0 : r + 1) << ',' << (ckf ? "" : std::to_string(s.L)) << ','
          << format_number(s.mse_steady(r)) << ',' << format_number(s.theory_avg(r)) << ','
          << format_number(s.rate(r)) << ',' << format_number(res.sigma2) << '\n';
    }
  }
  return out.str();
}

inline json results_json(const TrialResults& res, const Scenario& sc) {
  json series = json::array();
  for (const auto& s : res.series) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
      rows.push_back({{"sensor", s.filter == FilterKind::CKF ? 0 : r + 1},
                      {"mse_i", s.mse_steady(r)},
                      {"mse_i_se", s.mse_steady_se(r)},
                      {"theory_avg", num(s.theory_avg(r))},
                      {"rate_q", num(s.rate(r))}});
    }
    series.push_back({{"filter", filter_name(s.filter)},
                      {"L", s.L},
                      {"diverged_trials", s.diverged_trials},
                      {"rows", rows}});
  }
  json filters = json::array();
  for (auto f : sc.filters) filters.push_back(filter_name(f));
  return {{"seed", res.seed},
          {"trials", res.trials},
          {"horizon", res.horizon},
          {"period", res.period},
          {"steady_window", {res.steady_begin, res.horizon}},
          {"sigma2", res.sigma2},
          {"diameter", res.diameter},
          {"graph_hash", graph_hash(sc.graph)},
          {"centralized_avg", res.centralized_avg},
          {"L_values", sc.L_values},
          {"filters", filters},
          {"series", series}};
}

inline std::string gap_report_csv(const GapReport& rep) {
  std::ostringstream out;
  out << "sensor,L,gap_ric,gap_cov,avg_perf,rate,sigma2\n";
  for (const auto& r : rep.rows) {
    out << r.sensor + 1 << ',' << r.L << ',' << format_number(r.gap_ric) << ',' << format_number(r.gap_cov) << ','
        << format_number(r.avg_perf) << ','
        << format_number(r.rate ? *r.rate : std::numeric_limits<double>::quiet_NaN()) << ','
        << format_number(rep.sigma2) << '\n';
  }
  return out.str();
}

inline json gap_report_json(const GapReport& rep, const SensorGraph& g, double tol) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"sensor", r.sensor + 1},
                    {"L", r.L},
                    {"gap_ric", r.gap_ric},
                    {"gap_cov", r.gap_cov},
                    {"avg_perf", r.avg_perf},
                    {"rate", r.rate ? json(*r.rate) : json()}});
  }
  return {{"graph_hash", graph_hash(g)},
          {"tolerance", tol},
          {"structural_zero", kStructuralZero},
          {"sigma2", rep.sigma2},
          {"centralized_avg", rep.centralized_avg},
          {"L_values", rep.L_values},
          {"rows", rows}};
}

inline std::string rates_csv(const std::vector<std::vector<RateEntry>>& per_sensor, double sigma2) {
  std::ostringstream out;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  out << "sensor,L,gap,rate_q,at_floor,riccati_gap,riccati_rate,sigma2\n";
  for (std::size_t i = 0; i < per_sensor.size(); ++i) {
    for (const auto& e : per_sensor[i]) {
      out << i + 1 << ',' << e.L << ',' << format_number(e.gap) << ',' << format_number(e.rate.value_or(nan))
          << ',' << (e.at_floor ? 1 : 0) << ',' << format_number(e.riccati_gap) << ','
          << format_number(e.riccati_rate.value_or(nan)) << ',' << format_number(sigma2) << '\n';
    }
  }
  return out.str();
}

inline std::string cidf_csv(const CidfComparison& cmp) {
  std::ostringstream out;
  out << "sensor,L,mse_cmdf,se_cmdf,mse_cidf,se_cidf,cmdf_better,crossover_L\n";
  for (const auto& r : cmp.rows) {
    const auto& cross = cmp.crossover[r.sensor];
    out << r.sensor + 1 << ',' << r.L << ',' << format_number(r.mse_cmdf) << ',' << format_number(r.se_cmdf) << ','
        << format_number(r.mse_cidf) << ',' << format_number(r.se_cidf) << ','
        << (r.mse_cmdf < r.mse_cidf ? 1 : 0) << ',' << (cross ? std::to_string(*cross) : "") << '\n';
  }
  return out.str();
}

}  // namespace filterlab::io
