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

// filterlab command-line tool. Exit codes: 0 success, 1 invalid input or
// I/O failure, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "filterlab/filterlab.hpp"
#include "filterlab/io.hpp"

namespace fl = filterlab;
namespace fs = std::filesystem;
using fl::io::json;

namespace {

struct Options {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string fusion_steps;
  double tol = 1e-10;
  std::string filters;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_steps(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
    }
    if (v < 0 || used != item.size()) throw fl::ValidationError("bad fusion step '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

json load_scenario_json(const Options& o) {
  if (o.scenario.empty()) throw fl::ValidationError("--scenario is required for this command");
  return fl::io::load_json(o.scenario);
}

fl::Scenario load_scenario(const Options& o) {
  auto s = fl::io::scenario_from_json(load_scenario_json(o));
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  if (!o.fusion_steps.empty()) s.L_values = parse_steps(o.fusion_steps);
  if (!o.filters.empty()) {
    s.filters.clear();
    for (const auto& f : split_list(o.filters)) s.filters.push_back(fl::parse_filter(f));
  }
  return s;
}

fl::PlantModel load_plant(const json& j) {
  if (j.contains("plant")) return fl::io::plant_from_json(j.at("plant"));
  if (j.value("builtin", "") == "paper_sec5") return fl::paper_plant();
  return fl::io::plant_from_json(j);
}

fl::SolveOptions solve_options(const Options& o) {
  if (!(o.tol > 0.0)) throw fl::ValidationError("--tol must be positive");
  return {o.tol, 0};
}

fs::path out_dir(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw fl::IoError("cannot create output directory '" + o.out + "': " + ec.message());
  return fs::path(o.out);
}

void write(const fs::path& dir, const std::string& name, const std::string& content) {
  fl::io::write_text_file((dir / name).string(), content);
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << "  ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.12g", m(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

int cmd_solve_dpre(const Options& o) {
  const json j = load_scenario_json(o);
  const auto plant = load_plant(j);
  const auto opt = solve_options(o);
  const auto sol = fl::centralized_dpre(plant, opt);
  const auto dir = out_dir(o);
  write(dir, "dpre_centralized.json", fl::io::spps_to_json(sol, opt.tol).dump(2) + "\n");
  write(dir, "dpre_centralized.csv", fl::io::spps_csv(sol));
  std::cout << "centralized SPPS solution: period " << sol.period() << ", " << sol.iterations
            << " sweeps, residual " << sol.residual << "\n";
  for (std::size_t k = 0; k < sol.period(); ++k) std::cout << "P_" << k << ":\n" << format_matrix(sol.P[k]);

  if (j.contains("graph") && !o.fusion_steps.empty()) {
    const auto s = load_scenario(o);
    for (std::size_t L : s.L_values) {
      for (std::size_t i = 0; i < plant.N(); ++i) {
        const auto node = fl::cmdf_dpre(plant, s.weights, L, i, opt);
        write(dir, "dpre_sensor" + std::to_string(i + 1) + "_L" + std::to_string(L) + ".json",
              fl::io::spps_to_json(node, opt.tol).dump(2) + "\n");
      }
    }
  }
  return 0;
}

int cmd_observability(const Options& o) {
  const json j = load_scenario_json(o);
  const auto plant = load_plant(j);
  const auto [C, R] = fl::stacked_sequences(plant);
  const bool ok = fl::uniform_observability(plant.A(), C);
  std::cout << "stacked pair: uniformly observable: " << (ok ? "true" : "false") << "\n";
  for (std::size_t k = 0; k < plant.period(); ++k) {
    const auto step = fl::PeriodicSequence::constant(plant.A()[k]);
    const auto ck = fl::PeriodicSequence::constant(C[k]);
    std::cout << "  step " << k << " alone: Gramian rank "
              << fl::numerical_rank(fl::observability_gramian(step, ck, 0)) << " of " << plant.n() << "\n";
  }
  if (!j.contains("graph")) return 0;
  const auto s = load_scenario(o);
  for (std::size_t L : s.L_values) {
    const auto power = fl::weight_power(s.weights, L);
    for (std::size_t i = 0; i < plant.N(); ++i) {
      const auto mod = fl::modified_sequences(plant, power, i);
      std::cout << "sensor " << i + 1 << " L=" << L << ": uniformly observable: "
                << (fl::uniform_observability(plant.A(), mod.C) ? "true" : "false") << "\n";
    }
  }
  return 0;
}

void write_results(const fs::path& dir, const fl::TrialResults& res, const fl::Scenario& s) {
  write(dir, "mse_per_step.csv", fl::io::per_step_csv(res));
  write(dir, "mse_steady.csv", fl::io::steady_csv(res));
  write(dir, "results.json", fl::io::results_json(res, s).dump(2) + "\n");
}

void print_summary(const fl::TrialResults& res) {
  std::cout << "trials " << res.trials << ", horizon " << res.horizon << ", diameter " << res.diameter
            << ", sigma2 " << res.sigma2 << ", centralized average " << res.centralized_avg << "\n";
  for (const auto& sr : res.series) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < sr.rows(); ++r) {
      if (std::isfinite(sr.theory_avg(r))) {
        worst = std::max(worst, std::abs(sr.mse_steady(r) - sr.theory_avg(r)) / sr.theory_avg(r));
      }
    }
    std::cout << "  " << sr.label() << ": mean steady MSE " << sr.mse_steady.mean();
    if (sr.filter != fl::FilterKind::CIDF) std::cout << ", worst relative gap to theory " << worst;
    if (!sr.diverged_trials.empty()) std::cout << ", diverged trials " << sr.diverged_trials.size();
    std::cout << "\n";
  }
}

int cmd_simulate(const Options& o) {
  const auto s = load_scenario(o);
  const auto res = fl::run_monte_carlo(s);
  write_results(out_dir(o), res, s);
  print_summary(res);
  return 0;
}

int cmd_gap(const Options& o) {
  const auto s = load_scenario(o);
  const auto opt = solve_options(o);
  const auto rep = fl::build_gap_report(s.plant, s.weights, s.L_values, opt);
  const auto dir = out_dir(o);
  write(dir, "gap_report.csv", fl::io::gap_report_csv(rep));
  write(dir, "gap_report.json", fl::io::gap_report_json(rep, s.graph, opt.tol).dump(2) + "\n");
  std::cout << "sigma2 " << rep.sigma2 << ", centralized average " << rep.centralized_avg << ", "
            << rep.rows.size() << " cells\n";
  return 0;
}

int cmd_rates(const Options& o) {
  const auto s = load_scenario(o);
  const auto opt = solve_options(o);
  std::vector<std::vector<fl::RateEntry>> table(s.plant.N());
  fl::parallel_for(s.plant.N(), [&](std::size_t i) { table[i] = fl::rate_fit(s.plant, s.weights, i, s.L_values, opt); });
  const double sigma2 = fl::spectral_diagnostics(s.weights).sigma2;
  write(out_dir(o), "rates.csv", fl::io::rates_csv(table, sigma2));
  double worst = -1.0;
  for (const auto& row : table)
    for (const auto& e : row)
      if (e.rate) worst = std::max(worst, *e.rate);
  std::cout << "sigma2 " << sigma2 << ", largest finite rate " << worst << "\n";
  return 0;
}

void print_crossover(const fl::CidfComparison& cmp) {
  std::cout << "CMDF below CIDF for every observing sensor from L = "
            << (cmp.observing_crossover ? std::to_string(*cmp.observing_crossover) : std::string("(none)"))
            << "\n";
}

int cmd_compare_cidf(const Options& o) {
  auto s = load_scenario(o);
  for (auto f : {fl::FilterKind::CMDF, fl::FilterKind::CIDF})
    if (!s.has(f)) s.filters.push_back(f);
  const auto res = fl::run_monte_carlo(s);
  const auto cmp = fl::compare_cidf(s, res);
  write(out_dir(o), "cidf_comparison.csv", fl::io::cidf_csv(cmp));
  print_crossover(cmp);
  return 0;
}

int cmd_paper(const Options& o) {
  auto s = o.scenario.empty() ? fl::paper_scenario() : load_scenario(o);
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  if (!o.fusion_steps.empty()) s.L_values = parse_steps(o.fusion_steps);
  const auto opt = solve_options(o);
  const auto dir = out_dir(o);

  write(dir, "plant.json", fl::io::plant_to_json(s.plant).dump(2) + "\n");
  write(dir, "graph.json", fl::io::graph_to_json(s.graph).dump(2) + "\n");
  write(dir, "weights.csv", fl::io::weights_csv(s.weights));
  const auto P = fl::centralized_dpre(s.plant, opt);
  write(dir, "dpre_centralized.json", fl::io::spps_to_json(P, opt.tol).dump(2) + "\n");
  write(dir, "dpre_centralized.csv", fl::io::spps_csv(P));

  const auto rep = fl::build_gap_report(s.plant, s.weights, s.L_values, opt);
  write(dir, "gap_report.csv", fl::io::gap_report_csv(rep));
  write(dir, "gap_report.json", fl::io::gap_report_json(rep, s.graph, opt.tol).dump(2) + "\n");

  std::vector<std::vector<fl::RateEntry>> table(s.plant.N());
  fl::parallel_for(s.plant.N(), [&](std::size_t i) { table[i] = fl::rate_fit(s.plant, s.weights, i, s.L_values, opt); });
  write(dir, "rates.csv", fl::io::rates_csv(table, rep.sigma2));

  const auto res = fl::run_monte_carlo(s);
  write_results(dir, res, s);
  print_summary(res);
  if (s.has(fl::FilterKind::CMDF) && s.has(fl::FilterKind::CIDF)) {
    const auto cmp = fl::compare_cidf(s, res);
    write(dir, "cidf_comparison.csv", fl::io::cidf_csv(cmp));
    print_crossover(cmp);
  }
  std::cout << "outputs written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-on-measurement distributed filtering for periodic systems"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::size_t trials = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario or plant JSON file");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", seed, "Master seed for Monte Carlo trials");
    sub->add_option("--trials", trials, "Number of Monte Carlo trials")->check(CLI::PositiveNumber);
    sub->add_option("--fusion-steps", o.fusion_steps, "Comma separated fusion steps L");
    sub->add_option("--tol", o.tol, "Solver tolerance");
    sub->add_option("--filters", o.filters, "Comma separated subset of CKF,CMDF,CIDF");
  };

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry entries[] = {
      {"solve-dpre", "Solve the centralized periodic Riccati equation", cmd_solve_dpre},
      {"observability", "Check uniform observability of the stacked and per-node pairs", cmd_observability},
      {"simulate", "Run the Monte Carlo experiment", cmd_simulate},
      {"gap", "Write the per-sensor, per-L gap report", cmd_gap},
      {"rates", "Write the gap ratio table", cmd_rates},
      {"compare-cidf", "Compare CMDF against the CIDF baseline", cmd_compare_cidf},
      {"paper", "Run the 20-sensor benchmark end to end", cmd_paper},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    subs.emplace_back(sub, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (const auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--trials")) o.trials = trials;
    try {
      return entry->run(o);
    } catch (const fl::NumericalError& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      return 2;
    } catch (const fl::ValidationError& e) {
      std::cerr << "invalid input: " << e.what() << "\n";
      return 1;
    } catch (const fl::IoError& e) {
      std::cerr << "i/o error: " << e.what() << "\n";
      return 1;
    } catch (const json::exception& e) {
      std::cerr << "invalid input: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
