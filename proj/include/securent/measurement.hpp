#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "securent/rng.hpp"
#include "securent/topology.hpp"

namespace securent {

enum class MetricKind { additive_delay, min_capacity };

// Truncated-normal draw parameters, milliseconds.
struct DelayModel {
  double mean = 1.0;
  double spread = 0.2;
};

struct DelayParams {
  DelayModel idle{1.0, 0.2};
  DelayModel congested{10.0, 2.0};
};

struct CongestionScenario {
  double congestion_probability = 0.0;
  std::vector<bool> link_states;  // true = congested
  DelayModel idle{1.0, 0.2};
  DelayModel congested{10.0, 2.0};

  // ArgumentError unless p in [0,1], congested mean > idle mean, spreads >= 0.
  void validate() const;
};

struct LinkMetrics {
  std::vector<double> values;
  MetricKind kind = MetricKind::additive_delay;
};

// One row per probe round, one column per path.
struct MeasurementSeries {
  std::vector<std::vector<double>> rounds;
  MetricKind kind = MetricKind::additive_delay;
  double congestion_probability = 0.0;
  Seed seed = 0;

  std::size_t round_count() const { return rounds.size(); }
  std::size_t path_count() const { return rounds.empty() ? 0 : rounds.front().size(); }

  // `round,path_0,...,path_{P-1}` header, `%.9g` values.
  std::string to_csv() const;
  static MeasurementSeries from_csv(std::string_view content);
};

// Per-round ground truth kept beside a series for scoring; never handed to
// the attacker.
struct ProbeTruth {
  std::vector<std::vector<bool>> link_states;
  std::vector<std::vector<double>> link_values;
};

// Values below this are raised to it so every delay stays strictly positive.
inline constexpr double kMinDelay = 1e-6;

std::vector<bool> sample_congestion(std::size_t link_count, double p, Seed seed);
inline std::vector<bool> sample_congestion(const Topology& topology, double p, Seed seed) {
  return sample_congestion(topology.link_count(), p, seed);
}

double draw_delay(const DelayModel& model, Rng& rng);

LinkMetrics sample_link_delays(const CongestionScenario& scenario, Seed seed);

std::vector<double> aggregate(const RoutingMatrix& routing, const LinkMetrics& metrics);

// Seed used for probe round `round` of a series generated with `seed`.
inline Seed round_seed(Seed seed, std::size_t round) { return derive_seed(seed, round); }

// Link states and delays of a single round, as generate_probe_series draws them.
CongestionScenario round_scenario(const CongestionScenario& base, std::size_t link_count,
                                  Seed round_seed);

MeasurementSeries generate_probe_series(const RoutingMatrix& routing,
                                        const CongestionScenario& scenario, std::size_t n_probes,
                                        Seed seed, ProbeTruth* truth = nullptr);

}  // namespace securent
