#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "securent/errors.hpp"
#include "securent/text.hpp"
#include "securent/topology.hpp"

using namespace securent;

namespace {

std::string graphml(const std::string& body) {
  return "<?xml version=\"1.0\"?>\n"
         "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
         "<key id=\"w\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
         "<graph id=\"g\" edgedefault=\"undirected\">\n" +
         body + "</graph></graphml>\n";
}

Topology path_graph(const std::vector<std::string>& ids) {
  std::vector<Link> links;
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) links.push_back({i, i + 1, 1.0});
  return Topology("path", ids, links);
}

std::map<std::size_t, std::size_t> column_histogram(const RoutingMatrix& r) {
  std::map<std::size_t, std::size_t> h;
  for (auto c : r.column_sums()) ++h[c];
  return h;
}

}  // namespace

TEST(GraphMl, SingleEdgeDefaultsToUnitWeight) {
  const auto t = load_graphml(graphml("<node id=\"a\"/><node id=\"b\"/>"
                                      "<edge source=\"a\" target=\"b\"/>"));
  ASSERT_EQ(t.link_count(), 1u);
  EXPECT_EQ(t.links()[0].weight, 1.0);
}

TEST(GraphMl, ReadsWeightData) {
  const auto t = load_graphml(graphml("<node id=\"a\"/><node id=\"b\"/>"
                                      "<edge source=\"a\" target=\"b\"><data key=\"w\">2.5</data></edge>"));
  EXPECT_EQ(t.links()[0].weight, 2.5);
}

TEST(GraphMl, IsolatedNodeIsStructuralError) {
  EXPECT_THROW(load_graphml(graphml("<node id=\"a\"/><node id=\"b\"/><node id=\"c\"/>"
                                    "<edge source=\"a\" target=\"b\"/>")),
               StructuralError);
  EXPECT_THROW(load_graphml(graphml("<node id=\"a\"/><node id=\"b\"/>")), StructuralError);
}

TEST(GraphMl, MalformedXmlIsParseError) {
  EXPECT_THROW(load_graphml("<graphml><graph>"), ParseError);
}

TEST(GraphMl, RoundTrip) {
  const auto net = load_fixture(fixture_dir(), "ernet");
  const auto again = load_graphml(to_graphml(net.topology));
  ASSERT_EQ(again.link_count(), net.topology.link_count());
  for (std::size_t l = 0; l < again.link_count(); ++l) {
    EXPECT_EQ(again.nodes()[again.links()[l].a], net.topology.nodes()[net.topology.links()[l].a]);
    EXPECT_EQ(again.links()[l].weight, net.topology.links()[l].weight);
  }
}

TEST(Topology, RejectsSelfLoopsDuplicatesAndBadWeights) {
  EXPECT_THROW(Topology("t", {"a", "b"}, {{0, 0, 1.0}, {0, 1, 1.0}}), StructuralError);
  EXPECT_THROW(Topology("t", {"a", "b"}, {{0, 1, 1.0}, {1, 0, 1.0}}), StructuralError);
  EXPECT_THROW(Topology("t", {"a", "b"}, {{0, 1, 0.0}}), StructuralError);
  EXPECT_THROW(Topology("t", {"a", "b"}, {{0, 1, 1.0}}, {"a", "zz"}), ArgumentError);
}

TEST(SelectMonitors, StarPrefersLeaves) {
  const Topology star("star", {"hub", "x", "y", "z"}, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}});
  for (Seed seed : {0ull, 1ull, 99ull}) {
    auto m = select_monitors(star, 3, seed);
    std::sort(m.begin(), m.end());
    EXPECT_EQ(m, (std::vector<std::string>{"x", "y", "z"}));
  }
}

TEST(SelectMonitors, PathPicksEndpoints) {
  auto m = select_monitors(path_graph({"a", "b", "c"}), 2, 5);
  std::sort(m.begin(), m.end());
  EXPECT_EQ(m, (std::vector<std::string>{"a", "c"}));
}

TEST(ShortestPath, TriangleUsesDirectEdge) {
  const Topology tri("tri", {"a", "b", "c"}, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}, {"a", "b"});
  const auto paths = compute_paths(tri, tri.monitors());
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths.paths[0], (std::vector<std::size_t>{0}));
}

TEST(ShortestPath, FourNodePathHasThreeLinks) {
  const auto t = path_graph({"a", "b", "c", "d"});
  const std::vector<std::string> monitors{"a", "d"};
  EXPECT_EQ(compute_paths(t, monitors).paths[0].size(), 3u);
}

// Enumerates every simple path and keeps the lightest, breaking ties on the
// node-identifier sequence.
std::vector<std::size_t> brute_force_path(const Topology& t, std::size_t s, std::size_t d) {
  double best_w = std::numeric_limits<double>::infinity();
  std::vector<std::string> best_seq;
  std::vector<std::size_t> best_links, links;
  std::vector<bool> seen(t.node_count(), false);
  std::vector<std::string> seq{t.nodes()[s]};
  std::function<void(std::size_t, double)> dfs = [&](std::size_t u, double w) {
    if (u == d) {
      if (w < best_w || (w == best_w && seq < best_seq)) {
        best_w = w;
        best_seq = seq;
        best_links = links;
      }
      return;
    }
    seen[u] = true;
    for (auto l : t.incident(u)) {
      const auto v = t.links()[l].other(u);
      if (seen[v]) continue;
      links.push_back(l);
      seq.push_back(t.nodes()[v]);
      dfs(v, w + t.links()[l].weight);
      seq.pop_back();
      links.pop_back();
    }
    seen[u] = false;
  };
  dfs(s, 0.0);
  return best_links;
}

TEST(ShortestPath, MatchesBruteForceOnRandomGraphs) {
  auto rng = make_rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + trial % 5;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string((i * 7 + trial) % 97));
    std::vector<Link> links;
    std::uniform_int_distribution<int> weight(1, 3);
    for (std::size_t i = 1; i < n; ++i) {
      links.push_back({std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i,
                       static_cast<double>(weight(rng))});
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool exists = std::any_of(links.begin(), links.end(), [&](const Link& l) {
          return (l.a == i && l.b == j) || (l.a == j && l.b == i);
        });
        if (!exists && std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) {
          links.push_back({i, j, static_cast<double>(weight(rng))});
        }
      }
    }
    const Topology t("g", ids, links);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t d = 0; d < n; ++d) {
        if (s != d) EXPECT_EQ(shortest_path(t, s, d), brute_force_path(t, s, d));
      }
    }
  }
}

TEST(RoutingMatrix, SinglePathRow) {
  PathSet p;
  p.paths = {{0, 2}};
  p.endpoints = {{"a", "b"}};
  const auto r = build_routing_matrix(p, 3);
  EXPECT_TRUE(r.at(0, 0));
  EXPECT_FALSE(r.at(0, 1));
  EXPECT_TRUE(r.at(0, 2));
}

TEST(RoutingMatrix, EmptyPathSetIsDegenerate) {
  const auto r = build_routing_matrix(PathSet{}, 4);
  EXPECT_EQ(r.path_count(), 0u);
  EXPECT_EQ(r.link_count(), 4u);
  EXPECT_TRUE(r.degenerate());
}

TEST(RoutingMatrix, TextRoundTrip) {
  const auto net = load_fixture(fixture_dir(), "agis");
  EXPECT_EQ(RoutingMatrix::from_text(net.routing.to_text()), net.routing);
}

TEST(Summary, SingleLink) {
  const Topology t("one", {"a", "b"}, {{0, 1, 4.0}}, {"a", "b"});
  const auto net = make_network(t, ProbeMode::single_source);
  const auto s = summarize(net.topology, net.paths);
  EXPECT_EQ(s.mean_hops, 1.0);
  EXPECT_EQ(s.mean_weight, 4.0);
}

struct TableRow {
  const char* name;
  std::size_t paths;
  std::size_t links;
  double hops;    // one decimal
  double weight;  // one decimal
};

class TableOne : public ::testing::TestWithParam<TableRow> {};

TEST_P(TableOne, FixtureMatchesPublishedStatistics) {
  const auto row = GetParam();
  const auto net = load_fixture(fixture_dir(), row.name);
  const auto s = summarize(net.topology, net.paths);
  EXPECT_EQ(s.paths, row.paths);
  EXPECT_EQ(s.links, row.links);
  EXPECT_NEAR(s.mean_hops, row.hops, 0.05);
  EXPECT_NEAR(s.mean_weight, row.weight, 0.05);
  EXPECT_EQ(net.routing.path_count(), row.paths);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, TableOne,
                         ::testing::Values(TableRow{"chinanet", 17, 21, 3.9, 4.3},
                                           TableRow{"agis", 14, 18, 3.6, 2.8},
                                           TableRow{"ganet", 15, 17, 3.6, 3.1},
                                           TableRow{"ernet", 12, 13, 3.25, 3.0}),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Fixtures, ErnetExactAverages) {
  const auto net = load_fixture(fixture_dir(), "ernet");
  const auto s = summarize(net.topology, net.paths);
  EXPECT_DOUBLE_EQ(s.mean_hops, 3.25);
  EXPECT_DOUBLE_EQ(s.mean_weight, 3.0);
}

TEST(Fixtures, ChinanetColumnSumsFrozen) {
  const auto net = load_fixture(fixture_dir(), "chinanet");
  EXPECT_EQ(net.routing.path_count(), 17u);
  EXPECT_EQ(net.routing.link_count(), 21u);
  const std::map<std::size_t, std::size_t> frozen{{1, 11}, {2, 3}, {4, 2}, {5, 1},
                                                  {6, 2},  {8, 1}, {17, 1}};
  EXPECT_EQ(column_histogram(net.routing), frozen);
}

TEST(Fixtures, MonitorFileRegeneratesFromSeed) {
  for (const auto& name : fixture_names()) {
    const auto fixture =
        MonitorFixture::from_text(text::read_file(fixture_dir() / (name + ".monitors")));
    const auto graph = load_graphml_file(fixture_dir() / (name + ".graphml"));
    EXPECT_EQ(select_monitors(graph, fixture.count, fixture.seed), fixture.monitors) << name;
  }
}

TEST(Fixtures, MissingFixtureIsFileError) {
  EXPECT_THROW(load_fixture(fixture_dir(), "no-such-topology"), FileError);
}
