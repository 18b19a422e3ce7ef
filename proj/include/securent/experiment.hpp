#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "securent/attacker.hpp"
#include "securent/evaluation.hpp"
#include "securent/measurement.hpp"
#include "securent/obfuscation.hpp"
#include "securent/topology.hpp"

namespace securent {

enum class Method { none, securent, uniform_baseline };

std::string to_string(Method method);
Method parse_method(std::string_view text);

// Line-oriented key=value configuration; lists are comma separated. Every key
// has a default, so a config naming only the topology is complete.
struct ExperimentConfig {
  std::string topology = "ernet";  // fixture name or path to a .graphml file
  std::string monitors;            // .monitors file; defaults to the graph's sibling
  std::vector<Method> methods{Method::none, Method::securent, Method::uniform_baseline};
  std::vector<std::size_t> probe_counts{200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800};
  std::vector<double> probabilities{0.1, 0.2, 0.3, 0.4, 0.5};
  double low_p = 0.1;
  double high_p = 0.4;
  std::size_t probes = 1000;  // probe count wherever the grid does not vary it
  double p = 0.1;             // congestion probability wherever the grid does not vary it
  DelayParams delays;

  std::vector<double> alphas{0.5, 1.0, 2.0};
  std::vector<Seed> fake_seeds{1, 2};
  double c = 0.0;  // 0 picks c so that mean(X') equals the idle link mean
  ModuleParams module;
  double rewire_fraction = 0.3;
  double fake_activity = 0.1;
  double busy_factor = 10.0;
  double lambda1 = 10.0;
  double lambda2 = 1.0;

  double penalty = AttackerParams{}.penalty;
  double threshold_k = 3.0;
  // Trusted users receive the per-path noise profile (mean and spread) and
  // fold it into their congestion thresholds and link inference.
  bool noise_aware = true;
  std::size_t utility_rounds = 200;
  std::size_t trials = 10;
  Seed seed = 1;

  static ExperimentConfig from_text(std::string_view content);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  std::string to_text() const;
  // ArgumentError on empty lists, zero trials or out-of-range values.
  void validate() const;
};

Network load_experiment_network(const ExperimentConfig& config);

// One point of a grid: probe count and congestion probability.
struct Cell {
  std::size_t n_probes = 0;
  double p = 0.0;
  std::string label;  // extra column used by figure grids (e.g. "low")
};

// Seed of trial `trial` in `cell`; depends only on the master seed, topology
// name, the cell's values and the trial index.
Seed trial_seed(Seed master, std::string_view topology, const Cell& cell, std::size_t trial);

struct TrialOutcome {
  std::vector<EvaluationReport> reports;  // one per configured method, in order
  std::vector<std::string> errors;
};

// Full pipeline for one trial: scenario, measurements, protection, attack,
// scoring. Methods share the measurement series so comparisons are paired.
TrialOutcome run_trial(const Network& network, const ExperimentConfig& config, const Cell& cell,
                       Seed seed);

struct CellSummary {
  Cell cell;
  Method method = Method::none;
  std::size_t trials = 0;
  double similarity_mean = 0.0, similarity_stderr = 0.0;
  double f1_mean = 0.0, f1_stderr = 0.0;
  double nrmse_mean = 0.0, nrmse_stderr = 0.0;
  double objective_mean = 0.0, objective_stderr = 0.0;
  double inference_mean = 0.0, inference_stderr = 0.0;  // clamp(1 - nrmse)
};

struct GridResult {
  std::string topology;
  std::vector<EvaluationReport> rows;  // cell-major, then trial, then method
  std::vector<CellSummary> summary;    // cell-major, then method
  std::vector<std::string> errors;

  std::string trials_csv() const;
  std::string summary_csv() const;
};

// Runs every (cell, trial) on a pool of `jobs` workers. Output order does not
// depend on scheduling. Failed trials are logged to `log` and reported in
// `errors`; the rest of the grid still runs.
GridResult run_grid(const Network& network, const ExperimentConfig& config,
                    const std::vector<Cell>& cells, std::size_t jobs, std::ostream* log = nullptr);

// probe_counts x probabilities.
std::vector<Cell> experiment_cells(const ExperimentConfig& config);

enum class Figure { fig3, fig4, fig5 };
Figure parse_figure(std::string_view text);
std::string to_string(Figure figure);

std::vector<Cell> figure_cells(Figure figure, const ExperimentConfig& config);

// Plot-ready table for one topology: fig3 similarity by probe count, fig4 F1
// by congestion level, fig5 inference similarity by congestion probability.
std::string figure_csv(Figure figure, const GridResult& result);

}  // namespace securent
