#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "securent/rng.hpp"

namespace securent {

// Undirected link between two node indices.
struct Link {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 1.0;

  std::size_t other(std::size_t end) const { return end == a ? b : a; }
};

// Connected undirected graph with positive link weights and an ordered monitor
// list. The first monitor is the probe source in single-source mode.
class Topology {
 public:
  Topology() = default;

  // Throws StructuralError on disconnection, self-loops, duplicate links or
  // non-positive weights; ArgumentError on unknown or too few monitors.
  Topology(std::string name, std::vector<std::string> nodes, std::vector<Link> links,
           std::vector<std::string> monitors = {});

  const std::string& name() const { return name_; }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<std::string>& monitors() const { return monitors_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }

  std::optional<std::size_t> find_node(std::string_view id) const;
  std::size_t node_index(std::string_view id) const;  // ArgumentError if absent
  std::optional<std::size_t> find_link(std::size_t u, std::size_t v) const;

  // Link indices incident to a node, in link order.
  const std::vector<std::size_t>& incident(std::size_t node) const { return adjacency_[node]; }
  std::size_t degree(std::size_t node) const { return adjacency_[node].size(); }

  Topology with_monitors(std::vector<std::string> monitors) const;

  // Same node set and monitors, different links.
  Topology with_links(std::vector<Link> links) const;

 private:
  std::string name_;
  std::vector<std::string> nodes_;
  std::vector<Link> links_;
  std::vector<std::string> monitors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

// Connected components as lists of node identifiers; used by diagnostics.
std::vector<std::vector<std::string>> connected_components(
    std::span<const std::string> nodes, std::span<const Link> links);

bool is_connected(std::size_t node_count, std::span<const Link> links);

enum class ProbeMode {
  all_pairs,      // one path per unordered monitor pair
  single_source,  // paths from monitors[0] to every other monitor
};

std::string_view to_string(ProbeMode mode);
ProbeMode parse_probe_mode(std::string_view text);

struct PathSet {
  // Link indices along each path, ordered from source to destination.
  std::vector<std::vector<std::size_t>> paths;
  std::vector<std::pair<std::string, std::string>> endpoints;

  std::size_t size() const { return paths.size(); }
};

// Binary path-by-link incidence matrix.
class RoutingMatrix {
 public:
  RoutingMatrix() = default;
  RoutingMatrix(std::size_t paths, std::size_t links);

  std::size_t path_count() const { return rows_; }
  std::size_t link_count() const { return cols_; }
  bool degenerate() const { return rows_ == 0; }

  bool at(std::size_t path, std::size_t link) const { return data_[path * cols_ + link] != 0; }
  void set(std::size_t path, std::size_t link, bool on);

  std::size_t row_sum(std::size_t path) const;
  std::vector<double> hop_counts() const;
  std::vector<std::size_t> column_sums() const;
  std::vector<std::size_t> unmeasured_links() const;
  std::vector<std::size_t> links_on_path(std::size_t path) const;

  // R * x (additive aggregation).
  std::vector<double> multiply(std::span<const double> x) const;

  // `paths=<n> links=<m>` header then one space-separated 0/1 row per path.
  std::string to_text() const;
  static RoutingMatrix from_text(std::string_view text);

  bool operator==(const RoutingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

struct TopologySummary {
  std::size_t paths = 0;
  std::size_t links = 0;  // links traversed by at least one path
  double mean_hops = 0.0;
  double mean_weight = 0.0;
};

Topology load_graphml(std::string_view content, std::string name = {});
Topology load_graphml_file(const std::filesystem::path& path);
std::string to_graphml(const Topology& topology);

// Lowest degree first; equal degrees ordered by a seeded hash of the node
// identifier, then by the identifier itself.
std::vector<std::string> select_monitors(const Topology& topology, std::size_t count, Seed seed);

// Minimum-weight path between two nodes; among equal-weight paths the one
// with the lexicographically smallest node-identifier sequence.
std::vector<std::size_t> shortest_path(const Topology& topology, std::size_t source,
                                       std::size_t target);

PathSet compute_paths(const Topology& topology, std::span<const std::string> monitors,
                      ProbeMode mode = ProbeMode::all_pairs);

RoutingMatrix build_routing_matrix(const PathSet& paths, std::size_t link_count);

TopologySummary summarize(const Topology& topology, const PathSet& paths);

// Persisted monitor placement for one topology.
struct MonitorFixture {
  std::string topology;
  ProbeMode mode = ProbeMode::single_source;
  std::size_t count = 0;
  Seed seed = 0;
  std::vector<std::string> monitors;

  std::string to_text() const;
  static MonitorFixture from_text(std::string_view text);
};

// Topology with its monitors, paths and routing matrix resolved.
struct Network {
  Topology topology;
  ProbeMode mode = ProbeMode::single_source;
  PathSet paths;
  RoutingMatrix routing;
};

Network make_network(Topology topology, ProbeMode mode);

// Reads <dir>/<name>.graphml and <dir>/<name>.monitors.
Network load_fixture(const std::filesystem::path& dir, const std::string& name);

// SECURENT_FIXTURES if set, else the compiled-in default.
std::filesystem::path fixture_dir();

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"chinanet", "agis", "ganet", "ernet"};
  return names;
}

}  // namespace securent
