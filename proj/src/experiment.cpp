#include "securent/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "securent/errors.hpp"
#include "securent/text.hpp"

namespace securent {

std::string to_string(Method method) {
  switch (method) {
    case Method::none:
      return "none";
    case Method::securent:
      return "securent";
    case Method::uniform_baseline:
      return "uniform-baseline";
  }
  return "none";
}

Method parse_method(std::string_view text) {
  const auto t = text::trim(text);
  if (t == "none") return Method::none;
  if (t == "securent") return Method::securent;
  if (t == "uniform-baseline" || t == "uniform") return Method::uniform_baseline;
  throw ParseError("unknown method '" + std::string(t) + "'");
}

// ---------------------------------------------------------------- config

namespace {

std::vector<std::size_t> parse_size_list(std::string_view s) {
  std::vector<std::size_t> out;
  for (const auto& part : text::split(s, ',')) {
    out.push_back(static_cast<std::size_t>(text::parse_u64(part)));
  }
  return out;
}

std::vector<Seed> parse_seed_list(std::string_view s) {
  std::vector<Seed> out;
  for (const auto& part : text::split(s, ',')) out.push_back(text::parse_u64(part));
  return out;
}

bool parse_bool(std::string_view s) {
  const auto t = text::trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ParseError("expected a boolean, got '" + std::string(t) + "'");
}

template <typename T, typename F>
std::string join_with(const std::vector<T>& values, F format) {
  std::vector<std::string> parts;
  for (const auto& v : values) parts.push_back(format(v));
  return text::join(parts, ",");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(std::string_view content) {
  ExperimentConfig c;
  for (const auto& [key, value] : text::parse_key_values(content)) {
    if (key == "topology") {
      c.topology = value;
    } else if (key == "monitors") {
      c.monitors = value;
    } else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : text::split(value, ',')) c.methods.push_back(parse_method(m));
    } else if (key == "probe_counts") {
      c.probe_counts = parse_size_list(value);
    } else if (key == "probabilities") {
      c.probabilities = text::parse_double_list(value);
    } else if (key == "low_p") {
      c.low_p = text::parse_double(value);
    } else if (key == "high_p") {
      c.high_p = text::parse_double(value);
    } else if (key == "probes") {
      c.probes = static_cast<std::size_t>(text::parse_u64(value));
    } else if (key == "p") {
      c.p = text::parse_double(value);
    } else if (key == "idle_mean") {
      c.delays.idle.mean = text::parse_double(value);
    } else if (key == "idle_spread") {
      c.delays.idle.spread = text::parse_double(value);
    } else if (key == "congested_mean") {
      c.delays.congested.mean = text::parse_double(value);
    } else if (key == "congested_spread") {
      c.delays.congested.spread = text::parse_double(value);
    } else if (key == "alphas") {
      c.alphas = text::parse_double_list(value);
    } else if (key == "fake_seeds") {
      c.fake_seeds = parse_seed_list(value);
    } else if (key == "c") {
      c.c = text::parse_double(value);
    } else if (key == "gamma") {
      c.module.gamma = text::parse_double(value);
    } else if (key == "eta") {
      c.module.eta = text::parse_double(value);
    } else if (key == "t_max") {
      c.module.t_max = static_cast<std::size_t>(text::parse_u64(value));
    } else if (key == "rewire_fraction") {
      c.rewire_fraction = text::parse_double(value);
    } else if (key == "fake_activity") {
      c.fake_activity = text::parse_double(value);
    } else if (key == "busy_factor") {
      c.busy_factor = text::parse_double(value);
    } else if (key == "lambda1") {
      c.lambda1 = text::parse_double(value);
    } else if (key == "lambda2") {
      c.lambda2 = text::parse_double(value);
    } else if (key == "penalty") {
      c.penalty = text::parse_double(value);
    } else if (key == "threshold_k") {
      c.threshold_k = text::parse_double(value);
    } else if (key == "noise_aware") {
      c.noise_aware = parse_bool(value);
    } else if (key == "utility_rounds") {
      c.utility_rounds = static_cast<std::size_t>(text::parse_u64(value));
    } else if (key == "trials") {
      c.trials = static_cast<std::size_t>(text::parse_u64(value));
    } else if (key == "seed") {
      c.seed = text::parse_u64(value);
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  return from_text(text::read_file(path));
}

std::string ExperimentConfig::to_text() const {
  const auto d = [](double v) { return text::format_double(v); };
  const auto z = [](std::size_t v) { return std::to_string(v); };
  std::ostringstream out;
  out << "topology=" << topology << '\n';
  if (!monitors.empty()) out << "monitors=" << monitors << '\n';
  out << "methods=" << join_with(methods, [](Method m) { return to_string(m); }) << '\n'
      << "probe_counts=" << join_with(probe_counts, z) << '\n'
      << "probabilities=" << join_with(probabilities, d) << '\n'
      << "low_p=" << d(low_p) << '\n'
      << "high_p=" << d(high_p) << '\n'
      << "probes=" << probes << '\n'
      << "p=" << d(p) << '\n'
      << "idle_mean=" << d(delays.idle.mean) << '\n'
      << "idle_spread=" << d(delays.idle.spread) << '\n'
      << "congested_mean=" << d(delays.congested.mean) << '\n'
      << "congested_spread=" << d(delays.congested.spread) << '\n'
      << "alphas=" << join_with(alphas, d) << '\n'
      << "fake_seeds=" << join_with(fake_seeds, [](Seed s) { return std::to_string(s); }) << '\n'
      << "c=" << d(c) << '\n'
      << "gamma=" << d(module.gamma) << '\n'
      << "eta=" << d(module.eta) << '\n'
      << "t_max=" << module.t_max << '\n'
      << "rewire_fraction=" << d(rewire_fraction) << '\n'
      << "fake_activity=" << d(fake_activity) << '\n'
      << "busy_factor=" << d(busy_factor) << '\n'
      << "lambda1=" << d(lambda1) << '\n'
      << "lambda2=" << d(lambda2) << '\n'
      << "penalty=" << d(penalty) << '\n'
      << "threshold_k=" << d(threshold_k) << '\n'
      << "noise_aware=" << (noise_aware ? "true" : "false") << '\n'
      << "utility_rounds=" << utility_rounds << '\n'
      << "trials=" << trials << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ArgumentError("config: " + what); };
  if (topology.empty()) fail("topology is empty");
  if (methods.empty()) fail("methods list is empty");
  if (probe_counts.empty()) fail("probe_counts list is empty");
  if (probabilities.empty()) fail("probabilities list is empty");
  if (alphas.empty()) fail("alphas list is empty");
  if (fake_seeds.empty()) fail("fake_seeds list is empty");
  if (trials < 1) fail("trials must be at least 1");
  if (probes < 2) fail("probes must be at least 2");
  for (auto n : probe_counts) {
    if (n < 2) fail("every probe count must be at least 2");
  }
  auto check_p = [&](double v) {
    if (!(v >= 0.0 && v <= 1.0)) fail("probabilities must lie in [0,1]");
  };
  for (double v : probabilities) check_p(v);
  check_p(low_p);
  check_p(high_p);
  check_p(p);
  check_p(fake_activity);
  for (double a : alphas) {
    if (!(a > 0.0)) fail("alphas must be positive");
  }
  if (c < 0.0) fail("c must be positive (or 0 for automatic)");
  if (!(module.gamma > 0.0 && module.gamma < 1.0)) fail("gamma must lie in (0,1)");
  if (!(module.eta > 0.0)) fail("eta must be positive");
  if (!(rewire_fraction > 0.0 && rewire_fraction <= 1.0)) fail("rewire_fraction must lie in (0,1]");
  if (!(busy_factor >= 1.0)) fail("busy_factor must be at least 1");
  if (lambda1 < 0.0 || lambda2 < 0.0) fail("lambda1 and lambda2 must be nonnegative");
  if (!(penalty >= 0.0)) fail("penalty must be nonnegative");
  if (!(threshold_k >= 0.0)) fail("threshold_k must be nonnegative");
  if (utility_rounds < 1) fail("utility_rounds must be at least 1");
  CongestionScenario{p, {}, delays.idle, delays.congested}.validate();
}

Network load_experiment_network(const ExperimentConfig& config) {
  std::filesystem::path graph(config.topology);
  if (graph.extension() != ".graphml" && !graph.has_parent_path()) {
    return load_fixture(fixture_dir(), config.topology);
  }
  if (!std::filesystem::exists(graph)) throw FileError("missing topology " + graph.string());
  std::filesystem::path monitors =
      config.monitors.empty() ? std::filesystem::path(graph).replace_extension(".monitors")
                              : std::filesystem::path(config.monitors);
  if (!std::filesystem::exists(monitors)) {
    throw FileError("missing monitor fixture " + monitors.string());
  }
  auto topology = load_graphml_file(graph);
  const auto fixture = MonitorFixture::from_text(text::read_file(monitors));
  return make_network(topology.with_monitors(fixture.monitors), fixture.mode);
}

// ---------------------------------------------------------------- trials

Seed trial_seed(Seed master, std::string_view topology, const Cell& cell, std::size_t trial) {
  Seed s = derive_seed(master, topology);
  s = derive_seed(s, "n=" + std::to_string(cell.n_probes) + ",p=" + text::format_double(cell.p));
  return derive_seed(s, trial);
}

namespace {

struct Scored {
  EvaluationReport report;
  double added_noise = 0.0;  // total over the series
};

// Links no uncongested path crosses can explain a congested path; a path
// flagged congested whose links are all cleared cannot be explained by any
// link set, so the trusted user treats it as a false alarm.
void drop_unexplainable(std::vector<bool>& states, const RoutingMatrix& routing) {
  std::vector<bool> good(routing.link_count(), false);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i]) continue;
    for (std::size_t j = 0; j < routing.link_count(); ++j) {
      if (routing.at(i, j)) good[j] = true;
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i]) continue;
    bool any = false;
    for (std::size_t j = 0; j < routing.link_count() && !any; ++j) {
      any = routing.at(i, j) && !good[j];
    }
    if (!any) states[i] = false;
  }
}

class TrialRunner {
 public:
  TrialRunner(const Network& network, const ExperimentConfig& config, const Cell& cell, Seed seed)
      : network_(network), config_(config), cell_(cell), seed_(seed) {
    const CongestionScenario base{cell.p, {}, config.delays.idle, config.delays.congested};
    series_ = generate_probe_series(network.routing, base, cell.n_probes,
                                    derive_seed(seed, "probes"), &truth_);
    const double prior = std::clamp(cell.p, 1e-6, 1.0 - 1e-6);
    priors_.assign(network.routing.link_count(), prior);
    const auto colsum = network.routing.column_sums();
    for (std::size_t j = 0; j < colsum.size(); ++j) {
      if (colsum[j]) measured_.push_back(j);
    }
  }

  EvaluationReport none() {
    return score(series_, base_rule(), Method::none, 0.0).report;
  }

  const Scored& securent() {
    if (securent_) return *securent_;
    const auto noise_seed = derive_seed(seed_, "noise");
    std::optional<Scored> best;
    double best_objective = 0.0;
    std::vector<double> objectives;
    for (auto fs : config_.fake_seeds) {
      PlanOptions options;
      options.rewire_fraction = config_.rewire_fraction;
      options.target_mean_delay = config_.delays.idle.mean;
      options.c = config_.c;
      options.params = config_.module;
      options.fake_activity = config_.fake_activity;
      options.busy_factor = config_.busy_factor;
      auto plan = make_plan(network_, derive_seed(derive_seed(seed_, "fake"), fs), options);
      for (double alpha : config_.alphas) {
        plan.alpha = alpha;
        const auto observed = protect_series(plan, network_.routing, series_, noise_seed);
        auto rule = base_rule();
        if (config_.noise_aware) {
          auto profile = noise_profile(plan, network_.routing, 256, derive_seed(seed_, "profile"));
          rule.expected_noise = std::move(profile.mean);
          rule.noise_spread = std::move(profile.spread);
        }
        auto scored = score(observed, rule, Method::securent, distortion(observed));
        scored.added_noise = added(observed);
        objectives.push_back(scored.report.objective);
        if (!best || scored.report.objective < best_objective) {
          best_objective = scored.report.objective;
          best = std::move(scored);
        }
      }
    }
    // select_best applies the same lowest-index tie-break as the loop above.
    (void)select_best(objectives);
    securent_ = std::move(best);
    return *securent_;
  }

  EvaluationReport uniform() {
    const double budget = securent().added_noise;
    const auto useed = derive_seed(seed_, "uniform");
    const double scale = calibrate_uniform_scale(series_, budget, useed);
    const auto observed = protect_series_uniform(series_, scale, useed);
    auto rule = base_rule();
    if (config_.noise_aware) {
      rule.expected_noise.assign(series_.path_count(), scale / 2.0);
      rule.noise_spread.assign(series_.path_count(), scale / std::sqrt(12.0));
    }
    return score(observed, rule, Method::uniform_baseline, distortion(observed)).report;
  }

 private:
  ThresholdRule base_rule() const {
    ThresholdRule rule;
    rule.idle_mean = config_.delays.idle.mean;
    rule.spread = config_.delays.idle.spread;
    rule.k = config_.threshold_k;
    return rule;
  }

  // Root-mean-square per-round distance ||Y~_r - Y_r||_2.
  double distortion(const MeasurementSeries& observed) const {
    double sum = 0.0;
    for (std::size_t r = 0; r < observed.rounds.size(); ++r) {
      for (std::size_t i = 0; i < observed.path_count(); ++i) {
        const double d = observed.rounds[r][i] - series_.rounds[r][i];
        sum += d * d;
      }
    }
    return std::sqrt(sum / static_cast<double>(observed.rounds.size()));
  }

  double added(const MeasurementSeries& observed) const {
    double sum = 0.0;
    for (std::size_t r = 0; r < observed.rounds.size(); ++r) {
      for (std::size_t i = 0; i < observed.path_count(); ++i) {
        sum += observed.rounds[r][i] - series_.rounds[r][i];
      }
    }
    return sum;
  }

  Scored score(const MeasurementSeries& observed, const ThresholdRule& rule, Method method,
               double distortion_value) const {
    const auto& routing = network_.routing;
    const auto inferred =
        infer_topology(observed, network_.paths.endpoints, AttackerParams{config_.penalty});
    const double sim = similarity(graph_edit_costs(network_.topology, inferred));

    std::vector<bool> truth_states;
    std::vector<bool> detected;
    std::vector<double> truth_values;
    std::vector<double> estimates;
    const auto rounds = std::min(config_.utility_rounds, observed.rounds.size());
    for (std::size_t r = 0; r < rounds; ++r) {
      const auto& row = observed.rounds[r];
      auto states = classify_congested_paths(row, routing, rule);
      drop_unexplainable(states, routing);
      const auto links = clink_detect(states, routing, priors_);
      // A noise-aware trusted user removes the published mean noise before inverting.
      std::vector<double> centred(row.begin(), row.end());
      for (std::size_t i = 0; i < centred.size() && !rule.expected_noise.empty(); ++i) {
        centred[i] -= rule.expected_noise[i];
      }
      const auto est = trusted_link_inference(centred, routing);
      for (auto j : measured_) {
        truth_states.push_back(truth_.link_states[r][j]);
        detected.push_back(links[j]);
        truth_values.push_back(truth_.link_values[r][j]);
        estimates.push_back(est.values[j]);
      }
    }
    Scored out;
    out.report.similarity = sim;
    out.report.f1 = f1_score(truth_states, detected);
    out.report.nrmse = nrmse(truth_values, estimates);
    out.report.objective = objective_score(distortion_value, sim, out.report.nrmse,
                                           config_.lambda1, config_.lambda2);
    out.report.metadata = {network_.topology.name(), to_string(method), cell_.n_probes, cell_.p,
                           seed_};
    return out;
  }

  const Network& network_;
  const ExperimentConfig& config_;
  const Cell& cell_;
  Seed seed_;
  MeasurementSeries series_;
  ProbeTruth truth_;
  std::vector<double> priors_;
  std::vector<std::size_t> measured_;
  std::optional<Scored> securent_;
};

}  // namespace

TrialOutcome run_trial(const Network& network, const ExperimentConfig& config, const Cell& cell,
                       Seed seed) {
  TrialOutcome out;
  TrialRunner runner(network, config, cell, seed);
  for (auto method : config.methods) {
    try {
      switch (method) {
        case Method::none:
          out.reports.push_back(runner.none());
          break;
        case Method::securent:
          out.reports.push_back(runner.securent().report);
          break;
        case Method::uniform_baseline:
          out.reports.push_back(runner.uniform());
          break;
      }
    } catch (const std::exception& e) {
      out.errors.push_back(to_string(method) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- grids

std::vector<Cell> experiment_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto n : config.probe_counts) {
    for (double p : config.probabilities) cells.push_back({n, p, {}});
  }
  return cells;
}

namespace {

void mean_stderr(const std::vector<double>& v, double& mean, double& stderr_out) {
  mean = 0.0;
  stderr_out = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  stderr_out = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

GridResult run_grid(const Network& network, const ExperimentConfig& config,
                    const std::vector<Cell>& cells, std::size_t jobs, std::ostream* log) {
  config.validate();
  const auto& name = network.topology.name();
  const auto total = cells.size() * config.trials;
  std::vector<TrialOutcome> outcomes(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      const auto& cell = cells[t / config.trials];
      const auto trial = t % config.trials;
      try {
        outcomes[t] = run_trial(network, config, cell, trial_seed(config.seed, name, cell, trial));
      } catch (const std::exception& e) {
        outcomes[t].errors.push_back(std::string("trial: ") + e.what());
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, total));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  GridResult result;
  result.topology = name;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::vector<std::size_t>> by_method(config.methods.size());
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
      const auto& outcome = outcomes[c * config.trials + trial];
      for (const auto& e : outcome.errors) {
        std::string msg = name + " n=" + std::to_string(cells[c].n_probes) +
                          " p=" + text::format_double(cells[c].p) +
                          " trial=" + std::to_string(trial) + ": " + e;
        if (log) *log << "error: " << msg << '\n';
        result.errors.push_back(std::move(msg));
      }
      for (const auto& report : outcome.reports) {
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
          if (report.metadata.method == to_string(config.methods[m])) {
            by_method[m].push_back(result.rows.size());
          }
        }
        result.rows.push_back(report);
      }
    }
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      CellSummary s;
      s.cell = cells[c];
      s.method = config.methods[m];
      s.trials = by_method[m].size();
      std::vector<double> sim, f1, err, obj, inf;
      for (auto index : by_method[m]) {
        const auto* r = &result.rows[index];
        sim.push_back(r->similarity);
        f1.push_back(r->f1);
        err.push_back(r->nrmse);
        obj.push_back(r->objective);
        inf.push_back(inference_similarity(r->nrmse));
      }
      mean_stderr(sim, s.similarity_mean, s.similarity_stderr);
      mean_stderr(f1, s.f1_mean, s.f1_stderr);
      mean_stderr(err, s.nrmse_mean, s.nrmse_stderr);
      mean_stderr(obj, s.objective_mean, s.objective_stderr);
      mean_stderr(inf, s.inference_mean, s.inference_stderr);
      result.summary.push_back(s);
    }
  }
  return result;
}

std::string GridResult::trials_csv() const {
  std::string out = EvaluationReport::csv_header() + "\n";
  for (const auto& r : rows) out += r.csv_row() + "\n";
  return out;
}

std::string GridResult::summary_csv() const {
  const auto g = [](double v) { return text::format_g9(v); };
  std::ostringstream out;
  out << "topology,method,n_probes,p,trials,similarity_mean,similarity_stderr,f1_mean,f1_stderr,"
         "nrmse_mean,nrmse_stderr,objective_mean,objective_stderr\n";
  for (const auto& s : summary) {
    out << topology << ',' << to_string(s.method) << ',' << s.cell.n_probes << ',' << g(s.cell.p)
        << ',' << s.trials << ',' << g(s.similarity_mean) << ',' << g(s.similarity_stderr) << ','
        << g(s.f1_mean) << ',' << g(s.f1_stderr) << ',' << g(s.nrmse_mean) << ','
        << g(s.nrmse_stderr) << ',' << g(s.objective_mean) << ',' << g(s.objective_stderr)
        << '\n';
  }
  return out.str();
}

Figure parse_figure(std::string_view text) {
  const auto t = text::trim(text);
  if (t == "fig3") return Figure::fig3;
  if (t == "fig4") return Figure::fig4;
  if (t == "fig5") return Figure::fig5;
  throw ArgumentError("unknown figure '" + std::string(t) + "' (expected fig3, fig4 or fig5)");
}

std::string to_string(Figure figure) {
  switch (figure) {
    case Figure::fig3:
      return "fig3";
    case Figure::fig4:
      return "fig4";
    case Figure::fig5:
      return "fig5";
  }
  return "fig3";
}

std::vector<Cell> figure_cells(Figure figure, const ExperimentConfig& config) {
  std::vector<Cell> cells;
  switch (figure) {
    case Figure::fig3:
      for (auto n : config.probe_counts) cells.push_back({n, config.p, {}});
      break;
    case Figure::fig4:
      cells.push_back({config.probes, config.low_p, "low"});
      cells.push_back({config.probes, config.high_p, "high"});
      break;
    case Figure::fig5:
      for (double p : config.probabilities) cells.push_back({config.probes, p, {}});
      break;
  }
  return cells;
}

std::string figure_csv(Figure figure, const GridResult& result) {
  const auto g = [](double v) { return text::format_g9(v); };
  std::ostringstream out;
  switch (figure) {
    case Figure::fig3:
      out << "topology,n_probes,method,trials,similarity_mean,similarity_stderr\n";
      for (const auto& s : result.summary) {
        out << result.topology << ',' << s.cell.n_probes << ',' << to_string(s.method) << ','
            << s.trials << ',' << g(s.similarity_mean) << ',' << g(s.similarity_stderr) << '\n';
      }
      break;
    case Figure::fig4:
      out << "topology,level,p,method,trials,f1_mean,f1_stderr\n";
      for (const auto& s : result.summary) {
        out << result.topology << ',' << s.cell.label << ',' << g(s.cell.p) << ','
            << to_string(s.method) << ',' << s.trials << ',' << g(s.f1_mean) << ','
            << g(s.f1_stderr) << '\n';
      }
      break;
    case Figure::fig5:
      out << "topology,p,method,trials,inference_similarity_mean,inference_similarity_stderr\n";
      for (const auto& s : result.summary) {
        out << result.topology << ',' << g(s.cell.p) << ',' << to_string(s.method) << ','
            << s.trials << ',' << g(s.inference_mean) << ',' << g(s.inference_stderr) << '\n';
      }
      break;
  }
  return out.str();
}

}  // namespace securent
