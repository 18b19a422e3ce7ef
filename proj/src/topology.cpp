#include "securent/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "securent/errors.hpp"
#include "securent/text.hpp"

#ifndef SECURENT_DEFAULT_FIXTURE_DIR
#define SECURENT_DEFAULT_FIXTURE_DIR "fixtures"
#endif

namespace securent {

namespace {

std::string describe_components(const std::vector<std::vector<std::string>>& comps) {
  std::string out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (i) out += " | ";
    out += "{" + text::join(comps[i], ",") + "}";
  }
  return out;
}

}  // namespace

Topology::Topology(std::string name, std::vector<std::string> nodes, std::vector<Link> links,
                   std::vector<std::string> monitors)
    : name_(std::move(name)), nodes_(std::move(nodes)), links_(std::move(links)) {
  if (nodes_.empty()) throw StructuralError("topology has no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i], i).second) {
      throw StructuralError("duplicate node identifier '" + nodes_[i] + "'");
    }
  }
  adjacency_.assign(nodes_.size(), {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    const auto& link = links_[l];
    if (link.a >= nodes_.size() || link.b >= nodes_.size()) {
      throw StructuralError("link " + std::to_string(l) + " references an unknown node");
    }
    if (link.a == link.b) throw StructuralError("self-loop on node '" + nodes_[link.a] + "'");
    if (!(link.weight > 0.0) || !std::isfinite(link.weight)) {
      throw StructuralError("link " + nodes_[link.a] + "-" + nodes_[link.b] +
                            " has non-positive weight");
    }
    if (!seen.emplace(std::minmax(link.a, link.b)).second) {
      throw StructuralError("duplicate link " + nodes_[link.a] + "-" + nodes_[link.b]);
    }
    adjacency_[link.a].push_back(l);
    adjacency_[link.b].push_back(l);
  }
  if (!is_connected(nodes_.size(), links_)) {
    throw StructuralError("graph is disconnected: " +
                          describe_components(connected_components(nodes_, links_)));
  }
  if (!monitors.empty()) *this = with_monitors(std::move(monitors));
}

std::optional<std::size_t> Topology::find_node(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Topology::node_index(std::string_view id) const {
  const auto idx = find_node(id);
  if (!idx) throw ArgumentError("unknown node '" + std::string(id) + "'");
  return *idx;
}

std::optional<std::size_t> Topology::find_link(std::size_t u, std::size_t v) const {
  for (auto l : adjacency_[u]) {
    if (links_[l].other(u) == v) return l;
  }
  return std::nullopt;
}

Topology Topology::with_monitors(std::vector<std::string> monitors) const {
  if (monitors.size() < 2) throw ArgumentError("at least two monitors are required");
  std::set<std::string> unique;
  for (const auto& m : monitors) {
    if (!find_node(m)) throw ArgumentError("monitor '" + m + "' is not a node");
    if (!unique.insert(m).second) throw ArgumentError("monitor '" + m + "' listed twice");
  }
  Topology out = *this;
  out.monitors_ = std::move(monitors);
  return out;
}

Topology Topology::with_links(std::vector<Link> links) const {
  return Topology(name_, nodes_, std::move(links), monitors_);
}

std::vector<std::vector<std::string>> connected_components(std::span<const std::string> nodes,
                                                           std::span<const Link> links) {
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : links) parent[find(l.a)] = find(l.b);
  std::vector<std::vector<std::string>> comps;
  std::vector<std::ptrdiff_t> slot(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(comps.size());
      comps.emplace_back();
    }
    comps[static_cast<std::size_t>(slot[root])].push_back(nodes[i]);
  }
  return comps;
}

bool is_connected(std::size_t node_count, std::span<const Link> links) {
  if (node_count == 0) return false;
  std::vector<std::vector<std::size_t>> adj(node_count);
  for (const auto& l : links) {
    adj[l.a].push_back(l.b);
    adj[l.b].push_back(l.a);
  }
  std::vector<bool> seen(node_count, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == node_count;
}

std::string_view to_string(ProbeMode mode) {
  return mode == ProbeMode::all_pairs ? "all-pairs" : "single-source";
}

ProbeMode parse_probe_mode(std::string_view text) {
  if (text == "all-pairs") return ProbeMode::all_pairs;
  if (text == "single-source") return ProbeMode::single_source;
  throw ParseError("unknown probe mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- routing

RoutingMatrix::RoutingMatrix(std::size_t paths, std::size_t links)
    : rows_(paths), cols_(links), data_(paths * links, 0) {}

void RoutingMatrix::set(std::size_t path, std::size_t link, bool on) {
  data_[path * cols_ + link] = on ? 1 : 0;
}

std::size_t RoutingMatrix::row_sum(std::size_t path) const {
  return static_cast<std::size_t>(std::count(data_.begin() + static_cast<std::ptrdiff_t>(path * cols_),
                                             data_.begin() + static_cast<std::ptrdiff_t>((path + 1) * cols_),
                                             std::uint8_t{1}));
}

std::vector<double> RoutingMatrix::hop_counts() const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = static_cast<double>(row_sum(i));
  return out;
}

std::vector<std::size_t> RoutingMatrix::column_sums() const {
  std::vector<std::size_t> out(cols_, 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[j] += at(i, j) ? 1 : 0;
  }
  return out;
}

std::vector<std::size_t> RoutingMatrix::unmeasured_links() const {
  std::vector<std::size_t> out;
  const auto sums = column_sums();
  for (std::size_t j = 0; j < cols_; ++j) {
    if (sums[j] == 0) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> RoutingMatrix::links_on_path(std::size_t path) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < cols_; ++j) {
    if (at(path, j)) out.push_back(j);
  }
  return out;
}

std::vector<double> RoutingMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) {
    throw ArgumentError("routing matrix has " + std::to_string(cols_) + " links, vector has " +
                        std::to_string(x.size()));
  }
  std::vector<double> y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      if (at(i, j)) y[i] += x[j];
    }
  }
  return y;
}

std::string RoutingMatrix::to_text() const {
  std::ostringstream out;
  out << "paths=" << rows_ << " links=" << cols_ << '\n';
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      if (j) out << ' ';
      out << (at(i, j) ? '1' : '0');
    }
    out << '\n';
  }
  return out.str();
}

RoutingMatrix RoutingMatrix::from_text(std::string_view content) {
  const auto all = text::lines(content);
  std::vector<std::string> rows;
  for (const auto& l : all) {
    if (!text::trim(l).empty()) rows.push_back(l);
  }
  if (rows.empty()) throw ParseError("routing matrix: missing header");
  std::size_t paths = 0;
  std::size_t links = 0;
  {
    std::istringstream header(rows.front());
    std::string p;
    std::string l;
    header >> p >> l;
    if (p.rfind("paths=", 0) != 0 || l.rfind("links=", 0) != 0) {
      throw ParseError("routing matrix: header must be 'paths=<n> links=<m>'");
    }
    paths = static_cast<std::size_t>(text::parse_u64(p.substr(6)));
    links = static_cast<std::size_t>(text::parse_u64(l.substr(6)));
  }
  if (rows.size() != paths + 1) throw ParseError("routing matrix: row count does not match header");
  RoutingMatrix r(paths, links);
  for (std::size_t i = 0; i < paths; ++i) {
    std::istringstream row(rows[i + 1]);
    std::string cell;
    std::size_t j = 0;
    while (row >> cell) {
      if (j >= links || (cell != "0" && cell != "1")) {
        throw ParseError("routing matrix: bad row " + std::to_string(i));
      }
      r.set(i, j++, cell == "1");
    }
    if (j != links) throw ParseError("routing matrix: short row " + std::to_string(i));
  }
  return r;
}

// ---------------------------------------------------------------- graphml

Topology load_graphml(std::string_view content, std::string name) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in{std::string(content)};
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("GraphML: ") + e.what());
  }
  const auto root = doc.get_child_optional("graphml");
  if (!root) throw ParseError("GraphML: missing <graphml> root element");

  std::string weight_key;
  std::optional<double> weight_default;
  for (const auto& [tag, node] : *root) {
    if (tag != "key") continue;
    // "attr.name" contains the default path separator, so address it with '/'.
    const auto attr_name = node.get(pt::ptree::path_type("<xmlattr>/attr.name", '/'), "");
    if (node.get("<xmlattr>.for", "") == "edge" &&
        (attr_name == "weight" || attr_name == "LinkWeight")) {
      weight_key = node.get("<xmlattr>.id", "");
      if (auto d = node.get_optional<std::string>("default")) {
        weight_default = text::parse_double(*d);
      }
    }
  }
  const auto graph = root->get_child_optional("graph");
  if (!graph) throw ParseError("GraphML: missing <graph> element");
  if (graph->get("<xmlattr>.edgedefault", "undirected") != "undirected") {
    throw ParseError("GraphML: only undirected graphs are supported");
  }
  if (name.empty()) name = graph->get("<xmlattr>.id", "");

  std::vector<std::string> nodes;
  std::unordered_map<std::string, std::size_t> index;
  struct RawEdge {
    std::string source;
    std::string target;
    double weight;
  };
  std::vector<RawEdge> edges;
  for (const auto& [tag, node] : *graph) {
    if (tag == "node") {
      const auto id = node.get_optional<std::string>("<xmlattr>.id");
      if (!id) throw ParseError("GraphML: node without id");
      if (!index.emplace(*id, nodes.size()).second) {
        throw ParseError("GraphML: duplicate node id '" + *id + "'");
      }
      nodes.push_back(*id);
    } else if (tag == "edge") {
      const auto s = node.get_optional<std::string>("<xmlattr>.source");
      const auto t = node.get_optional<std::string>("<xmlattr>.target");
      if (!s || !t) throw ParseError("GraphML: edge without source/target");
      if (node.get("<xmlattr>.directed", "false") == "true") {
        throw ParseError("GraphML: directed edge " + *s + "->" + *t);
      }
      double w = weight_default.value_or(1.0);
      for (const auto& [dtag, data] : node) {
        if (dtag == "data" && !weight_key.empty() &&
            data.get("<xmlattr>.key", "") == weight_key) {
          w = text::parse_double(data.data());
        }
      }
      edges.push_back({*s, *t, w});
    }
  }

  // Topology Zoo files occasionally repeat an edge; keep the lightest copy.
  std::vector<Link> links;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  for (const auto& e : edges) {
    const auto a = index.find(e.source);
    const auto b = index.find(e.target);
    if (a == index.end() || b == index.end()) {
      throw ParseError("GraphML: edge references unknown node " + e.source + "-" + e.target);
    }
    if (a->second == b->second) continue;
    const auto key = std::minmax(a->second, b->second);
    if (const auto it = seen.find(key); it != seen.end()) {
      links[it->second].weight = std::min(links[it->second].weight, e.weight);
      continue;
    }
    seen.emplace(key, links.size());
    links.push_back({a->second, b->second, e.weight});
  }
  return Topology(std::move(name), std::move(nodes), std::move(links));
}

Topology load_graphml_file(const std::filesystem::path& path) {
  return load_graphml(text::read_file(path), path.stem().string());
}

std::string to_graphml(const Topology& topology) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"d0\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
      << "  <graph id=\"" << topology.name() << "\" edgedefault=\"undirected\">\n";
  for (const auto& n : topology.nodes()) out << "    <node id=\"" << n << "\"/>\n";
  for (const auto& l : topology.links()) {
    out << "    <edge source=\"" << topology.nodes()[l.a] << "\" target=\""
        << topology.nodes()[l.b] << "\"><data key=\"d0\">" << text::format_double(l.weight)
        << "</data></edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
  return out.str();
}

// ---------------------------------------------------------------- monitors and paths

std::vector<std::string> select_monitors(const Topology& topology, std::size_t count, Seed seed) {
  if (count < 2 || count > topology.node_count()) {
    throw ArgumentError("monitor count " + std::to_string(count) + " outside [2, " +
                        std::to_string(topology.node_count()) + "]");
  }
  std::vector<std::size_t> order(topology.node_count());
  std::iota(order.begin(), order.end(), 0);
  const auto& ids = topology.nodes();
  auto key = [&](std::size_t i) {
    return std::tuple<std::size_t, std::uint64_t, const std::string&>(
        topology.degree(i), splitmix64(seed ^ fnv1a(ids[i])), ids[i]);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });
  std::vector<std::string> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(ids[order[k]]);
  return out;
}

namespace {

std::vector<double> dijkstra(const Topology& t, std::size_t source) {
  std::vector<double> dist(t.node_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto l : t.incident(u)) {
      const auto v = t.links()[l].other(u);
      const double nd = d + t.links()[l].weight;
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<std::size_t> shortest_path(const Topology& topology, std::size_t source,
                                       std::size_t target) {
  if (source >= topology.node_count() || target >= topology.node_count()) {
    throw ArgumentError("shortest_path: node index out of range");
  }
  if (source == target) return {};
  const auto from_source = dijkstra(topology, source);
  const auto to_target = dijkstra(topology, target);
  const double total = from_source[target];
  const double tol = 1e-12 * std::max(1.0, total);
  std::vector<std::size_t> path;
  std::size_t cur = source;
  double walked = 0.0;
  while (cur != target) {
    std::optional<std::size_t> best_link;
    for (auto l : topology.incident(cur)) {
      const auto v = topology.links()[l].other(cur);
      const double through = walked + topology.links()[l].weight + to_target[v];
      if (std::abs(through - total) > tol || !(to_target[v] < to_target[cur])) continue;
      if (!best_link ||
          topology.nodes()[v] < topology.nodes()[topology.links()[*best_link].other(cur)]) {
        best_link = l;
      }
    }
    if (!best_link) throw NumericError("shortest_path: could not trace a tight path");
    walked += topology.links()[*best_link].weight;
    path.push_back(*best_link);
    cur = topology.links()[*best_link].other(cur);
  }
  return path;
}

PathSet compute_paths(const Topology& topology, std::span<const std::string> monitors,
                      ProbeMode mode) {
  if (monitors.size() < 2) throw ArgumentError("compute_paths: need at least two monitors");
  std::vector<std::size_t> idx;
  for (const auto& m : monitors) idx.push_back(topology.node_index(m));
  if (std::set<std::size_t>(idx.begin(), idx.end()).size() != idx.size()) {
    throw ArgumentError("compute_paths: duplicate monitor");
  }
  PathSet out;
  auto add = [&](std::size_t i, std::size_t j) {
    out.paths.push_back(shortest_path(topology, idx[i], idx[j]));
    out.endpoints.emplace_back(monitors[i], monitors[j]);
  };
  if (mode == ProbeMode::single_source) {
    for (std::size_t j = 1; j < idx.size(); ++j) add(0, j);
  } else {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = i + 1; j < idx.size(); ++j) add(i, j);
    }
  }
  return out;
}

RoutingMatrix build_routing_matrix(const PathSet& paths, std::size_t link_count) {
  RoutingMatrix r(paths.size(), link_count);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths.paths[i].empty()) throw ArgumentError("path " + std::to_string(i) + " is empty");
    for (auto l : paths.paths[i]) {
      if (l >= link_count) {
        throw ArgumentError("path " + std::to_string(i) + " uses link " + std::to_string(l) +
                            " but only " + std::to_string(link_count) + " links exist");
      }
      r.set(i, l, true);
    }
  }
  return r;
}

TopologySummary summarize(const Topology& topology, const PathSet& paths) {
  TopologySummary s;
  s.paths = paths.size();
  std::set<std::size_t> used;
  std::size_t hops = 0;
  for (const auto& p : paths.paths) {
    hops += p.size();
    used.insert(p.begin(), p.end());
  }
  s.links = used.size();
  if (s.paths) s.mean_hops = static_cast<double>(hops) / static_cast<double>(s.paths);
  double weight = 0.0;
  for (auto l : used) weight += topology.links()[l].weight;
  if (s.links) s.mean_weight = weight / static_cast<double>(s.links);
  return s;
}

// ---------------------------------------------------------------- fixtures

std::string MonitorFixture::to_text() const {
  std::ostringstream out;
  out << "topology=" << topology << '\n'
      << "mode=" << securent::to_string(mode) << '\n'
      << "count=" << count << '\n'
      << "seed=" << seed << '\n'
      << "monitors=" << text::join(monitors, ",") << '\n';
  return out.str();
}

MonitorFixture MonitorFixture::from_text(std::string_view content) {
  const auto kv = text::parse_key_values(content);
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("monitor fixture: missing '") + key + "'");
    return it->second;
  };
  MonitorFixture f;
  f.topology = need("topology");
  f.mode = parse_probe_mode(need("mode"));
  f.count = static_cast<std::size_t>(text::parse_u64(need("count")));
  f.seed = text::parse_u64(need("seed"));
  f.monitors = text::split(need("monitors"), ',');
  if (f.monitors.size() != f.count) throw ParseError("monitor fixture: count does not match list");
  return f;
}

Network make_network(Topology topology, ProbeMode mode) {
  Network n;
  n.mode = mode;
  n.paths = compute_paths(topology, topology.monitors(), mode);
  n.routing = build_routing_matrix(n.paths, topology.link_count());
  n.topology = std::move(topology);
  return n;
}

Network load_fixture(const std::filesystem::path& dir, const std::string& name) {
  const auto graph = dir / (name + ".graphml");
  const auto mons = dir / (name + ".monitors");
  if (!std::filesystem::exists(graph)) throw FileError("missing fixture " + graph.string());
  if (!std::filesystem::exists(mons)) throw FileError("missing fixture " + mons.string());
  auto topology = load_graphml_file(graph);
  const auto fixture = MonitorFixture::from_text(text::read_file(mons));
  return make_network(topology.with_monitors(fixture.monitors), fixture.mode);
}

std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("SECURENT_FIXTURES"); env && *env) return env;
  return SECURENT_DEFAULT_FIXTURE_DIR;
}

}  // namespace securent
