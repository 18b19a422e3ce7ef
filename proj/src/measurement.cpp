#include "securent/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "securent/errors.hpp"
#include "securent/text.hpp"

namespace securent {

void CongestionScenario::validate() const {
  if (!(congestion_probability >= 0.0 && congestion_probability <= 1.0)) {
    throw ArgumentError("congestion probability must lie in [0,1]");
  }
  if (!(congested.mean > idle.mean)) {
    throw ArgumentError("congested mean delay must exceed idle mean delay");
  }
  if (idle.mean <= 0.0 || idle.spread < 0.0 || congested.spread < 0.0) {
    throw ArgumentError("delay means must be positive and spreads non-negative");
  }
}

std::vector<bool> sample_congestion(std::size_t link_count, double p, Seed seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("congestion probability must lie in [0,1]");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> states(link_count);
  for (std::size_t j = 0; j < link_count; ++j) states[j] = u(rng) < p;
  return states;
}

double draw_delay(const DelayModel& model, Rng& rng) {
  if (model.spread <= 0.0) return std::max(model.mean, kMinDelay);
  std::normal_distribution<double> n(model.mean, model.spread);
  return std::max(n(rng), kMinDelay);
}

LinkMetrics sample_link_delays(const CongestionScenario& scenario, Seed seed) {
  scenario.validate();
  auto rng = make_rng(seed);
  LinkMetrics m;
  m.kind = MetricKind::additive_delay;
  m.values.reserve(scenario.link_states.size());
  for (bool congested : scenario.link_states) {
    m.values.push_back(draw_delay(congested ? scenario.congested : scenario.idle, rng));
  }
  return m;
}

std::vector<double> aggregate(const RoutingMatrix& routing, const LinkMetrics& metrics) {
  if (metrics.values.size() != routing.link_count()) {
    throw ArgumentError("aggregate: routing matrix has " + std::to_string(routing.link_count()) +
                        " links, metrics have " + std::to_string(metrics.values.size()));
  }
  if (metrics.kind == MetricKind::additive_delay) return routing.multiply(metrics.values);
  std::vector<double> y(routing.path_count(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < routing.path_count(); ++i) {
    for (std::size_t j = 0; j < routing.link_count(); ++j) {
      if (routing.at(i, j)) y[i] = std::min(y[i], metrics.values[j]);
    }
  }
  return y;
}

CongestionScenario round_scenario(const CongestionScenario& base, std::size_t link_count,
                                  Seed seed) {
  CongestionScenario s = base;
  s.link_states =
      sample_congestion(link_count, base.congestion_probability, derive_seed(seed, "states"));
  return s;
}

MeasurementSeries generate_probe_series(const RoutingMatrix& routing,
                                        const CongestionScenario& scenario, std::size_t n_probes,
                                        Seed seed, ProbeTruth* truth) {
  if (n_probes < 1) throw ArgumentError("n_probes must be at least 1");
  scenario.validate();
  MeasurementSeries series;
  series.kind = MetricKind::additive_delay;
  series.congestion_probability = scenario.congestion_probability;
  series.seed = seed;
  series.rounds.reserve(n_probes);
  if (truth) {
    truth->link_states.clear();
    truth->link_values.clear();
  }
  for (std::size_t r = 0; r < n_probes; ++r) {
    const auto rs = round_seed(seed, r);
    const auto sc = round_scenario(scenario, routing.link_count(), rs);
    const auto metrics = sample_link_delays(sc, derive_seed(rs, "delays"));
    series.rounds.push_back(aggregate(routing, metrics));
    if (truth) {
      truth->link_states.push_back(sc.link_states);
      truth->link_values.push_back(metrics.values);
    }
  }
  return series;
}

std::string MeasurementSeries::to_csv() const {
  std::ostringstream out;
  out << "round";
  for (std::size_t i = 0; i < path_count(); ++i) out << ",path_" << i;
  out << '\n';
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    out << r;
    for (double v : rounds[r]) out << ',' << text::format_g9(v);
    out << '\n';
  }
  return out.str();
}

MeasurementSeries MeasurementSeries::from_csv(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) throw ParseError("measurement CSV: empty input");
  const auto header = text::split(rows.front(), ',');
  if (header.empty() || header.front() != "round") {
    throw ParseError("measurement CSV: header must start with 'round'");
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "path_" + std::to_string(i - 1)) {
      throw ParseError("measurement CSV: unexpected column '" + header[i] + "'");
    }
  }
  MeasurementSeries s;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    const auto cells = text::split(rows[r], ',');
    if (cells.size() != header.size()) {
      throw ParseError("measurement CSV: row " + std::to_string(r) + " has wrong width");
    }
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(text::parse_double(cells[i]));
    s.rounds.push_back(std::move(row));
  }
  return s;
}

}  // namespace securent
