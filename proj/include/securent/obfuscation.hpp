#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "securent/measurement.hpp"
#include "securent/rng.hpp"
#include "securent/topology.hpp"

namespace securent {

// Decoy graph whose path-level delays become the injected noise. Rows of
// `routing` line up with the real path set (same endpoint pairs).
struct FakeTopology {
  Topology graph;               // link weights are the fake lengths
  PathSet paths;
  RoutingMatrix routing;
  std::vector<double> lengths;  // one per fake link, > 0
};

// Degree-preserving double-edge swaps (ceil(rewire_fraction * |L|) of them)
// on the real graph, connectivity-checked and required to differ from it.
// Fake lengths are uniform over the real weight range. Throws GenerationError
// when no admissible rewiring is found within the retry budget.
FakeTopology generate_fake_topology(const Topology& real, const PathSet& paths, Seed seed,
                                    double rewire_fraction);

// Inverse-length delays: x'_j = c / (l'_j + 1).
std::vector<double> fake_link_delays(std::span<const double> fake_lengths, double c);

// Fake path delays R' X'.
std::vector<double> raw_noise(const RoutingMatrix& fake_routing, std::span<const double> x_prime);
inline std::vector<double> raw_noise(const FakeTopology& fake, std::span<const double> x_prime) {
  return raw_noise(fake.routing, x_prime);
}

struct ModuleParams {
  double eta = 0.1;     // learning rate
  double gamma = 0.01;  // stop once loss <= gamma * initial loss
  std::size_t t_max = 1000;
};

struct ModuleResult {
  std::vector<double> output;
  std::size_t iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;         // left the loop through the loss check
  std::vector<double> loss_trace;  // loss after each iteration
};

// Sum-preserving projected gradient descent pulling `initial` toward
// `target` under squared L2 loss. The input is first rescaled to the target
// sum; every iteration takes a gradient step, clamps at zero and rescales
// back onto the target sum.
ModuleResult protection_computing_module(std::span<const double> initial,
                                         std::span<const double> target,
                                         const ModuleParams& params = {});

// Algorithm 1 applied to (R' X', R 1). The target uses a ones vector over the
// real links so that R 1 is the per-path hop count.
std::vector<double> adjusted_noise(const RoutingMatrix& real_routing, const FakeTopology& fake,
                                   std::span<const double> x_prime,
                                   const ModuleParams& params = {});

// y + alpha * delta.
std::vector<double> apply_protection(std::span<const double> y, std::span<const double> delta,
                                     double alpha);

// ||protected - y||_2 - lambda1 * (1 - similarity) + lambda2 * nrmse. Lower is better.
double objective_score(std::span<const double> y, std::span<const double> protected_y,
                       double similarity_protected, double nrmse_trusted, double lambda1,
                       double lambda2);

// Same objective with the distortion term ||protected - y|| already computed.
double objective_score(double distortion, double similarity_protected, double nrmse_trusted,
                       double lambda1, double lambda2);

// Everything needed to replay a protection run.
struct ObfuscationPlan {
  FakeTopology fake;
  double c = 1.0;
  double alpha = 1.0;
  std::vector<double> fake_delays;     // X'
  std::vector<double> raw_noise;       // R' X'
  std::vector<double> adjusted_noise;  // M(R' X', R 1)
  ModuleParams params;
  Seed fake_seed = 0;
  double rewire_fraction = 0.3;
  // Per-round activity of fake links: each round a fake link is "busy" with
  // this probability and its delay is scaled by `busy_factor`.
  double fake_activity = 0.1;
  double busy_factor = 10.0;

  std::string to_text() const;
  // `real` supplies the node set the fake graph was built on.
  static ObfuscationPlan from_text(std::string_view content, const Topology& real);
};

struct PlanOptions {
  double alpha = 1.0;
  double rewire_fraction = 0.3;
  // c such that mean(X') equals this value (ms); the idle link mean by default.
  double target_mean_delay = 1.0;
  // Explicit Eq. 4 constant; when positive it overrides target_mean_delay.
  double c = 0.0;
  ModuleParams params;
  double fake_activity = 0.1;
  double busy_factor = 10.0;
};

// c making the mean of x'_j = c/(l'_j+1) equal to `mean_delay`.
double scaling_constant_for_mean(std::span<const double> fake_lengths, double mean_delay);

ObfuscationPlan make_plan(const Network& real, Seed fake_seed, const PlanOptions& options);

// Noise vector for one probe round: fake delays perturbed by that round's
// fake-link activity, pushed through the protection computing module.
std::vector<double> round_noise(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                                Seed round_seed);

// Per-path mean and standard deviation of alpha * round_noise, estimated
// from `draws` rounds. This is what the operator hands trusted users so their
// congestion thresholds can allow for the noise.
struct NoiseProfile {
  std::vector<double> mean;
  std::vector<double> spread;
};

NoiseProfile noise_profile(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                           std::size_t draws, Seed seed);

// Protected series: every round gets y_r + alpha * round_noise(r).
MeasurementSeries protect_series(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                                 const MeasurementSeries& series, Seed seed);

struct UniformNoise {
  std::vector<double> row;
  double added = 0.0;  // total noise added, for budget matching
};

// y_i + U[0, scale], i.i.d. per path.
UniformNoise baseline_uniform_noise(std::span<const double> y, double scale, Seed seed);

MeasurementSeries protect_series_uniform(const MeasurementSeries& series, double scale, Seed seed,
                                         double* added_total = nullptr);

// Bisection on the uniform scale so the noise protect_series_uniform adds to
// `series` totals `budget` (relative tolerance 1e-4).
double calibrate_uniform_scale(const MeasurementSeries& series, double budget, Seed seed);

// Index of the lowest objective; ties go to the lower index.
std::size_t select_best(std::span<const double> objectives);

}  // namespace securent
