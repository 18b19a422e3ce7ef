#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "securent/measurement.hpp"
#include "securent/topology.hpp"

namespace securent {

struct PathStatistics {
  std::vector<double> means;
  std::vector<std::vector<double>> covariance;  // sample covariance, P x P
};

PathStatistics estimate_path_statistics(const MeasurementSeries& series);

// Graph reconstructed from measurements alone. Monitor nodes keep their
// identifiers; hypothesised internal nodes are named h0, h1, ...
struct InferredTopology {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> links;
  RoutingMatrix routing;
  bool low_confidence = false;  // covariance carried no usable signal

  std::size_t node_count() const { return nodes.size(); }
  std::size_t link_count() const { return links.size(); }
  Topology to_topology(std::string name = "inferred") const;
};

struct AttackerParams {
  // Minimum variance of an internal link, relative to the largest path
  // variance, for its lower endpoint to survive as a separate node.
  double penalty = 0.08;
};

// Covariance-based logical tree per probe source, built by average-linkage
// agglomeration (largest shared covariance merges first) and pruned of
// internal links whose variance falls below the penalty. Trees from
// different sources are merged on matching monitor partitions.
InferredTopology infer_topology(const MeasurementSeries& series,
                                std::span<const std::pair<std::string, std::string>> monitor_pairs,
                                const AttackerParams& params = {});

// Serialises through to_topology() into the GraphML dialect load_graphml reads.
std::string to_graphml(const InferredTopology& inferred);

}  // namespace securent
