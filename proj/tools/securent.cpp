// Command-line front end: plans, attacks, scoring and experiment grids.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "securent/attacker.hpp"
#include "securent/errors.hpp"
#include "securent/evaluation.hpp"
#include "securent/experiment.hpp"
#include "securent/obfuscation.hpp"
#include "securent/text.hpp"

namespace fs = std::filesystem;
using namespace securent;

namespace {

struct Common {
  std::string config;
  std::optional<Seed> seed;
  std::string out = ".";
  std::size_t jobs = 0;
  std::string topology;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value experiment config");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "worker threads (default: hardware concurrency)");
  app->add_option("--topology", c.topology, "fixture name or .graphml path");
}

ExperimentConfig resolve_config(const Common& c) {
  auto config = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  if (!c.topology.empty()) config.topology = c.topology;
  if (c.seed) config.seed = *c.seed;
  config.validate();
  return config;
}

std::size_t resolve_jobs(const Common& c) {
  if (c.jobs) return c.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

fs::path output_dir(const Common& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

int cmd_simulate(const Common& c) {
  const auto config = resolve_config(c);
  const auto network = load_experiment_network(config);
  CongestionScenario scenario;
  scenario.congestion_probability = config.p;
  scenario.idle = config.delays.idle;
  scenario.congested = config.delays.congested;
  scenario.validate();
  const auto series = generate_probe_series(network.routing, scenario, config.probes,
                                            derive_seed(config.seed, "probes"));
  const auto dir = output_dir(c);
  text::write_file(dir / "series.csv", series.to_csv());
  std::cout << "wrote " << series.round_count() << " rounds to " << (dir / "series.csv").string()
            << '\n';
  return 0;
}

int cmd_protect(const Common& c, double alpha, const std::string& series_path) {
  const auto config = resolve_config(c);
  const auto network = load_experiment_network(config);
  PlanOptions options;
  options.alpha = alpha;
  options.rewire_fraction = config.rewire_fraction;
  options.target_mean_delay = config.delays.idle.mean;
  options.c = config.c;
  options.params = config.module;
  options.fake_activity = config.fake_activity;
  options.busy_factor = config.busy_factor;
  const auto plan = make_plan(network, config.seed, options);
  const auto dir = output_dir(c);
  text::write_file(dir / "plan.txt", plan.to_text());
  std::cout << "wrote " << (dir / "plan.txt").string() << '\n';
  if (!series_path.empty()) {
    const auto series = MeasurementSeries::from_csv(text::read_file(series_path));
    const auto protected_series =
        protect_series(plan, network.routing, series, derive_seed(config.seed, "noise"));
    text::write_file(dir / "protected.csv", protected_series.to_csv());
    std::cout << "wrote " << (dir / "protected.csv").string() << '\n';
  }
  return 0;
}

int cmd_attack(const Common& c, const std::string& series_path, double penalty) {
  const auto config = resolve_config(c);
  const auto network = load_experiment_network(config);
  const auto series = MeasurementSeries::from_csv(text::read_file(series_path));
  const auto inferred = infer_topology(series, network.paths.endpoints, AttackerParams{penalty});
  const auto dir = output_dir(c);
  text::write_file(dir / "inferred.graphml", to_graphml(inferred));
  std::cout << "inferred " << inferred.node_count() << " nodes, " << inferred.link_count()
            << " links" << (inferred.low_confidence ? " (low confidence)" : "") << '\n'
            << "wrote " << (dir / "inferred.graphml").string() << '\n';
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& inferred_path) {
  const auto config = resolve_config(c);
  const auto network = load_experiment_network(config);
  const auto inferred = load_graphml_file(inferred_path);
  const auto costs =
      graph_edit_costs(shape_of(network.topology), shape_of(inferred), network.topology.monitors());
  std::cout << "g0,g1,g2,similarity,exact\n"
            << text::format_g9(costs.g0) << ',' << text::format_g9(costs.g1) << ','
            << text::format_g9(costs.g2) << ',' << text::format_g9(similarity(costs)) << ','
            << (costs.exact ? "true" : "false") << '\n';
  return 0;
}

int cmd_run(const Common& c) {
  const auto config = resolve_config(c);
  const auto network = load_experiment_network(config);
  const auto result =
      run_grid(network, config, experiment_cells(config), resolve_jobs(c), &std::cerr);
  const auto dir = output_dir(c);
  text::write_file(dir / "trials.csv", result.trials_csv());
  text::write_file(dir / "summary.csv", result.summary_csv());
  std::cout << "wrote " << result.rows.size() << " trial rows to " << (dir / "trials.csv").string()
            << '\n';
  return result.errors.empty() ? 0 : 1;
}

int cmd_reproduce(const Common& c, const std::string& figure_name) {
  const auto figure = parse_figure(figure_name);
  auto config = resolve_config(c);
  const auto dir = output_dir(c);
  // Check every fixture up front so a missing one fails before any work.
  const auto fixtures = fixture_dir();
  for (const auto& name : fixture_names()) {
    for (const char* ext : {".graphml", ".monitors"}) {
      const auto path = fixtures / (name + ext);
      if (!fs::exists(path)) throw FileError("missing fixture " + path.string());
    }
  }
  bool failed = false;
  for (const auto& name : fixture_names()) {
    config.topology = name;
    const auto network = load_fixture(fixtures, name);
    const auto result =
        run_grid(network, config, figure_cells(figure, config), resolve_jobs(c), &std::cerr);
    failed = failed || !result.errors.empty();
    const auto path = dir / (to_string(figure) + "_" + name + ".csv");
    text::write_file(path, figure_csv(figure, result));
    std::cout << "wrote " << path.string() << '\n';
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SecureNT network tomography privacy lab"};
  app.require_subcommand(1);

  Common common;

  auto* simulate = app.add_subcommand("simulate", "write a measurement CSV at the configured probes and p");
  add_common(simulate, common);

  auto* protect = app.add_subcommand("protect", "build an obfuscation plan (and optionally apply it)");
  add_common(protect, common);
  double alpha = 1.0;
  std::string protect_series_path;
  protect->add_option("--alpha", alpha, "noise magnitude")->check(CLI::PositiveNumber);
  protect->add_option("--series", protect_series_path, "measurement CSV to protect");

  auto* attack = app.add_subcommand("attack", "infer a topology from a measurement CSV");
  add_common(attack, common);
  std::string attack_series_path;
  double penalty = AttackerParams{}.penalty;
  attack->add_option("--series", attack_series_path, "measurement CSV")->required();
  attack->add_option("--penalty", penalty, "internal-link pruning penalty");

  auto* evaluate = app.add_subcommand("evaluate", "score an inferred GraphML against the topology");
  add_common(evaluate, common);
  std::string inferred_path;
  evaluate->add_option("--inferred", inferred_path, "inferred GraphML")->required();

  auto* run = app.add_subcommand("run", "run the configured experiment grid");
  add_common(run, common);

  auto* reproduce = app.add_subcommand("reproduce", "emit plot-ready CSVs for a paper figure");
  add_common(reproduce, common);
  std::string figure;
  reproduce->add_option("figure", figure, "fig3, fig4 or fig5")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(common);
    if (*protect) return cmd_protect(common, alpha, protect_series_path);
    if (*attack) return cmd_attack(common, attack_series_path, penalty);
    if (*evaluate) return cmd_evaluate(common, inferred_path);
    if (*run) return cmd_run(common);
    if (*reproduce) return cmd_reproduce(common, figure);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
