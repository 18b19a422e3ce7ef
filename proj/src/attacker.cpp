#include "securent/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "securent/errors.hpp"

namespace securent {

PathStatistics estimate_path_statistics(const MeasurementSeries& series) {
  const auto n = series.round_count();
  if (n < 2) throw ArgumentError("path statistics need at least two probe rounds");
  const auto p = series.path_count();
  PathStatistics s;
  s.means.assign(p, 0.0);
  for (const auto& row : series.rounds) {
    if (row.size() != p) throw ArgumentError("ragged measurement series");
    for (std::size_t i = 0; i < p; ++i) s.means[i] += row[i];
  }
  for (auto& m : s.means) m /= static_cast<double>(n);
  s.covariance.assign(p, std::vector<double>(p, 0.0));
  for (const auto& row : series.rounds) {
    for (std::size_t i = 0; i < p; ++i) {
      const double di = row[i] - s.means[i];
      for (std::size_t j = i; j < p; ++j) s.covariance[i][j] += di * (row[j] - s.means[j]);
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      s.covariance[i][j] /= static_cast<double>(n - 1);
      s.covariance[j][i] = s.covariance[i][j];
    }
  }
  return s;
}

Topology InferredTopology::to_topology(std::string name) const {
  std::vector<Link> out;
  out.reserve(links.size());
  for (const auto& [a, b] : links) out.push_back({a, b, 1.0});
  return Topology(std::move(name), nodes, std::move(out));
}

namespace {

using Partition = std::set<std::set<std::string>>;

// Logical tree for one probe source. Leaves carry the receiver's position in
// the group; `gamma` is the variance shared from the source down to the node.
struct LogicalTree {
  struct Node {
    std::vector<std::size_t> children;
    double gamma = 0.0;
    std::optional<std::size_t> leaf;
    // Receiver sitting at this branch point: its own link variance is too
    // small to be a separate link.
    std::optional<std::size_t> located;
  };
  std::vector<Node> nodes;
  std::size_t top = 0;
};

LogicalTree star_tree(std::size_t k) {
  LogicalTree t;
  for (std::size_t i = 0; i < k; ++i) t.nodes.push_back({{}, 0.0, i, std::nullopt});
  LogicalTree::Node hub;
  for (std::size_t i = 0; i < k; ++i) hub.children.push_back(i);
  t.nodes.push_back(hub);
  t.top = k;
  return t;
}

LogicalTree agglomerate(const std::vector<std::vector<double>>& cov) {
  const auto k = cov.size();
  LogicalTree t;
  std::vector<std::size_t> size;
  for (std::size_t i = 0; i < k; ++i) {
    t.nodes.push_back({{}, cov[i][i], i, std::nullopt});
    size.push_back(1);
  }
  // Pairwise covariance sums between active clusters, keyed by node id.
  std::map<std::pair<std::size_t, std::size_t>, double> sums;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) sums[{i, j}] = cov[i][j];
  }
  auto sum_of = [&](std::size_t a, std::size_t b) { return sums.at(std::minmax(a, b)); };
  std::vector<std::size_t> active(k);
  for (std::size_t i = 0; i < k; ++i) active[i] = i;
  while (active.size() > 1) {
    std::size_t ba = 0;
    std::size_t bb = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const double avg = sum_of(active[x], active[y]) /
                           static_cast<double>(size[active[x]] * size[active[y]]);
        if (avg > best) {
          best = avg;
          ba = x;
          bb = y;
        }
      }
    }
    const auto a = active[ba];
    const auto b = active[bb];
    const auto v = t.nodes.size();
    LogicalTree::Node node;
    node.children = {a, b};
    node.gamma = std::min({best, t.nodes[a].gamma, t.nodes[b].gamma});
    t.nodes.push_back(node);
    size.push_back(size[a] + size[b]);
    for (auto other : active) {
      if (other == a || other == b) continue;
      sums[std::minmax(v, other)] = sum_of(a, other) + sum_of(b, other);
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(ba));
    active.push_back(v);
  }
  t.top = active.front();
  return t;
}

// Collapses internal children whose link variance is below the threshold.
void prune(LogicalTree& t, double threshold) {
  std::deque<std::size_t> queue{t.top};
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<std::size_t> kept;
      for (auto c : t.nodes[v].children) {
        const auto& child = t.nodes[c];
        if (!child.leaf && child.gamma - t.nodes[v].gamma < threshold) {
          kept.insert(kept.end(), child.children.begin(), child.children.end());
          changed = true;
        } else {
          kept.push_back(c);
        }
      }
      t.nodes[v].children = std::move(kept);
    }
    for (auto c : t.nodes[v].children) {
      if (!t.nodes[c].leaf) queue.push_back(c);
    }
  }
}

// A leaf child whose terminal link variance falls below the threshold is the
// branch point itself; the closest such leaf takes the internal node's place.
void locate_receivers(LogicalTree& t, double threshold) {
  std::vector<std::size_t> order{t.top};
  for (std::size_t q = 0; q < order.size(); ++q) {
    auto& node = t.nodes[order[q]];
    std::optional<std::size_t> best;
    for (auto c : node.children) {
      const auto& child = t.nodes[c];
      if (!child.leaf) {
        order.push_back(c);
        continue;
      }
      const double gap = child.gamma - node.gamma;
      if (gap < threshold && (!best || gap < t.nodes[*best].gamma - node.gamma)) best = c;
    }
    if (best) {
      node.located = *t.nodes[*best].leaf;
      std::erase(node.children, *best);
    }
  }
}

// Whether any link reachable from the top clears the threshold.
bool any_link_above(const LogicalTree& t, double threshold) {
  std::vector<std::size_t> order{t.top};
  for (std::size_t q = 0; q < order.size(); ++q) {
    const auto& node = t.nodes[order[q]];
    for (auto c : node.children) {
      if (t.nodes[c].gamma - node.gamma >= threshold) return true;
      order.push_back(c);
    }
  }
  return false;
}

void collect_leaves(const LogicalTree& t, std::size_t v, std::set<std::size_t>& out) {
  if (t.nodes[v].leaf) {
    out.insert(*t.nodes[v].leaf);
    return;
  }
  if (t.nodes[v].located) out.insert(*t.nodes[v].located);
  for (auto c : t.nodes[v].children) collect_leaves(t, c, out);
}

struct GlobalNode {
  Partition signature;
  std::set<std::string> universe;
};

Partition restrict(const Partition& p, const std::set<std::string>& keep) {
  Partition out;
  for (const auto& part : p) {
    std::set<std::string> r;
    for (const auto& m : part) {
      if (keep.count(m)) r.insert(m);
    }
    if (!r.empty()) out.insert(std::move(r));
  }
  return out;
}

}  // namespace

InferredTopology infer_topology(const MeasurementSeries& series,
                                std::span<const std::pair<std::string, std::string>> monitor_pairs,
                                const AttackerParams& params) {
  if (series.path_count() != monitor_pairs.size()) {
    throw ArgumentError("series has " + std::to_string(series.path_count()) + " paths but " +
                        std::to_string(monitor_pairs.size()) + " monitor pairs were given");
  }
  const auto stats = estimate_path_statistics(series);

  InferredTopology out;
  std::map<std::string, std::size_t> index;
  auto monitor_node = [&](const std::string& id) {
    auto [it, inserted] = index.emplace(id, out.nodes.size());
    if (inserted) out.nodes.push_back(id);
    return it->second;
  };
  for (const auto& [s, t] : monitor_pairs) {
    monitor_node(s);
    monitor_node(t);
  }
  std::map<std::size_t, GlobalNode> internal;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto add_edge = [&](std::size_t a, std::size_t b) {
    if (a != b) edges.insert(std::minmax(a, b));
  };

  // Group paths by probe source, in order of first appearance.
  std::vector<std::string> sources;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < monitor_pairs.size(); ++i) {
    const auto& s = monitor_pairs[i].first;
    if (!groups.count(s)) sources.push_back(s);
    groups[s].push_back(i);
  }

  bool any_signal = false;
  for (const auto& source : sources) {
    const auto& paths = groups[source];
    const auto k = paths.size();
    if (k == 1) {
      add_edge(index.at(source), index.at(monitor_pairs[paths[0]].second));
      continue;
    }
    std::vector<std::vector<double>> cov(k, std::vector<double>(k));
    double norm = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) cov[a][b] = stats.covariance[paths[a]][paths[b]];
      norm = std::max(norm, cov[a][a]);
    }
    LogicalTree tree;
    bool top_is_source = false;
    if (!(norm > 1e-12) || !std::isfinite(norm)) {
      tree = star_tree(k);
    } else {
      any_signal = true;
      tree = agglomerate(cov);
      const double threshold = params.penalty * norm;
      prune(tree, threshold);
      if (!any_link_above(tree, threshold)) {
        // Nothing survives the penalty: no link can be told apart.
        tree = star_tree(k);
      } else {
        locate_receivers(tree, threshold);
        // No variance shared by every path: the source itself is the first branch point.
        const auto& top = tree.nodes[tree.top];
        top_is_source = !top.located && top.gamma < threshold;
      }
    }

    std::set<std::string> universe{source};
    for (auto p : paths) universe.insert(monitor_pairs[p].second);
    std::map<std::size_t, std::size_t> to_global;
    std::set<std::size_t> used;
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
      const auto& node = tree.nodes[v];
      if (node.leaf) {
        to_global[v] = index.at(monitor_pairs[paths[*node.leaf]].second);
      }
    }
    // Visit internal nodes reachable from the top, parents first.
    std::vector<std::size_t> order{tree.top};
    for (std::size_t q = 0; q < order.size(); ++q) {
      for (auto c : tree.nodes[order[q]].children) {
        if (!tree.nodes[c].leaf) order.push_back(c);
      }
    }
    for (auto v : order) {
      if (tree.nodes[v].located) {
        to_global[v] = index.at(monitor_pairs[paths[*tree.nodes[v].located]].second);
        continue;
      }
      if (v == tree.top && top_is_source) {
        to_global[v] = index.at(source);
        continue;
      }
      Partition sig;
      std::set<std::string> below;
      for (auto c : tree.nodes[v].children) {
        std::set<std::size_t> leaves;
        collect_leaves(tree, c, leaves);
        std::set<std::string> part;
        for (auto l : leaves) part.insert(monitor_pairs[paths[l]].second);
        below.insert(part.begin(), part.end());
        sig.insert(std::move(part));
      }
      std::set<std::string> up;
      for (const auto& m : universe) {
        if (!below.count(m)) up.insert(m);
      }
      if (!up.empty()) sig.insert(up);

      std::optional<std::size_t> match;
      for (const auto& [gid, g] : internal) {
        if (used.count(gid)) continue;
        if (!std::includes(g.universe.begin(), g.universe.end(), universe.begin(), universe.end())) {
          continue;
        }
        if (restrict(g.signature, universe) == sig) {
          match = gid;
          break;
        }
      }
      if (!match) {
        match = out.nodes.size();
        out.nodes.push_back("h" + std::to_string(internal.size()));
        internal[*match] = {sig, universe};
      }
      used.insert(*match);
      to_global[v] = *match;
    }
    add_edge(index.at(source), to_global.at(tree.top));
    for (auto v : order) {
      for (auto c : tree.nodes[v].children) add_edge(to_global.at(v), to_global.at(c));
    }
  }
  out.low_confidence = !any_signal;
  out.links.assign(edges.begin(), edges.end());

  // Route every measured path through the inferred graph (BFS, lowest node id first).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(out.nodes.size());
  for (std::size_t l = 0; l < out.links.size(); ++l) {
    adj[out.links[l].first].emplace_back(out.links[l].second, l);
    adj[out.links[l].second].emplace_back(out.links[l].first, l);
  }
  out.routing = RoutingMatrix(monitor_pairs.size(), out.links.size());
  for (std::size_t i = 0; i < monitor_pairs.size(); ++i) {
    const auto s = index.at(monitor_pairs[i].first);
    const auto t = index.at(monitor_pairs[i].second);
    std::vector<std::optional<std::size_t>> via(out.nodes.size());
    std::vector<bool> seen(out.nodes.size(), false);
    std::deque<std::size_t> q{s};
    seen[s] = true;
    while (!q.empty() && !seen[t]) {
      const auto u = q.front();
      q.pop_front();
      for (const auto& [v, l] : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          via[v] = l;
          q.push_back(v);
        }
      }
    }
    if (!seen[t]) throw NumericError("inferred graph does not connect a measured pair");
    for (auto v = t; v != s;) {
      const auto l = *via[v];
      out.routing.set(i, l, true);
      v = out.links[l].first == v ? out.links[l].second : out.links[l].first;
    }
  }
  return out;
}

std::string to_graphml(const InferredTopology& inferred) {
  return to_graphml(inferred.to_topology());
}

}  // namespace securent
