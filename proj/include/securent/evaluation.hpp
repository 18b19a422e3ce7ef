#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "securent/attacker.hpp"
#include "securent/rng.hpp"
#include "securent/topology.hpp"

namespace securent {

// Plain undirected graph view used by the edit-distance scorer.
struct GraphShape {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> links;
};

GraphShape shape_of(const Topology& topology);
GraphShape shape_of(const InferredTopology& inferred);

struct EditCosts {
  double g0 = 0.0;  // real -> inferred
  double g1 = 0.0;  // real -> empty
  double g2 = 0.0;  // empty -> inferred
  bool exact = true;
};

// Unit costs per node and link insertion/deletion. Nodes named in `anchors`
// map to the same-named node on the other side; the remaining nodes are
// matched by branch-and-bound over all injective assignments, falling back
// to the best assignment found within the search budget when the smaller
// side exceeds eight unanchored nodes.
EditCosts graph_edit_costs(const GraphShape& real, const GraphShape& inferred,
                           std::span<const std::string> anchors);

// Anchors on the real topology's monitors.
EditCosts graph_edit_costs(const Topology& real, const InferredTopology& inferred);

// 1 - g0 / (g1 + g2).
double similarity(double g0, double g1, double g2);
inline double similarity(const EditCosts& c) { return similarity(c.g0, c.g1, c.g2); }

struct ThresholdRule {
  double idle_mean = 1.0;
  double spread = 0.2;
  double k = 3.0;
  // Mean of any protection noise the trusted user knows was added to each
  // path; empty means none.
  std::vector<double> expected_noise;
  // Standard deviation of that noise per path, folded into the margin.
  std::vector<double> noise_spread;
};

// Path i is congested iff y_i > h_i * idle_mean + offset_i
//                                 + k * sqrt(spread^2 * h_i + noise_spread_i^2).
std::vector<bool> classify_congested_paths(std::span<const double> row,
                                           const RoutingMatrix& routing,
                                           const ThresholdRule& rule);

// Smallest-weight link set (weight -log p_j) explaining every congested path,
// using only links that lie on no uncongested path. Exact branch-and-bound up
// to 20 candidate links, greedy set cover beyond. InfeasibleError when a
// congested path has no candidate link.
std::vector<bool> clink_detect(const std::vector<bool>& path_states, const RoutingMatrix& routing,
                               std::span<const double> link_priors);

double clink_weight(const std::vector<bool>& links, std::span<const double> link_priors);

// F1 over the positive class; 1.0 when neither vector has a positive.
double f1_score(const std::vector<bool>& truth, const std::vector<bool>& predicted);

struct LinkEstimate {
  std::vector<double> values;       // NaN where unidentifiable
  std::vector<bool> identifiable;   // false for links on no path
  std::size_t iterations = 0;
};

struct NnlsOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
};

// Nonnegative least squares fit of R x ~ y by projected coordinate descent.
LinkEstimate trusted_link_inference(std::span<const double> row, const RoutingMatrix& routing,
                                    const NnlsOptions& options = {});

double nrmse(std::span<const double> truth, std::span<const double> estimate);

// NRMSE restricted to identifiable links.
double nrmse(std::span<const double> truth, const LinkEstimate& estimate);

// Fraction of link performance recovered: clamp(1 - nrmse, 0, 1).
inline double inference_similarity(double nrmse_value) {
  return nrmse_value >= 1.0 ? 0.0 : (nrmse_value <= 0.0 ? 1.0 : 1.0 - nrmse_value);
}

struct ReportMetadata {
  std::string topology;
  std::string method;
  std::size_t n_probes = 0;
  double congestion_probability = 0.0;
  Seed seed = 0;
};

struct EvaluationReport {
  double similarity = 0.0;
  double f1 = 0.0;
  double nrmse = 0.0;
  double objective = 0.0;
  ReportMetadata metadata;

  static std::string csv_header();  // topology,method,n_probes,p,seed,similarity,f1,nrmse,objective
  std::string csv_row() const;
};

}  // namespace securent
