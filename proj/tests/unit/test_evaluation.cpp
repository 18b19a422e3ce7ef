#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

#include "securent/errors.hpp"
#include "securent/evaluation.hpp"
#include "securent/measurement.hpp"

using namespace securent;

namespace {

RoutingMatrix matrix(const std::vector<std::vector<int>>& rows) {
  RoutingMatrix r(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) r.set(i, j, rows[i][j] != 0);
  }
  return r;
}

GraphShape random_shape(Rng& rng, std::size_t n, double density) {
  GraphShape g;
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("v" + std::to_string(i));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (u(rng) < density) g.links.emplace_back(i, j);
    }
  }
  return g;
}

// Minimum unit-cost edit over every partial injective node map.
double brute_force_ged(const GraphShape& a, const GraphShape& b) {
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::set<std::pair<std::size_t, std::size_t>> eb;
  for (auto [x, y] : b.links) eb.insert(std::minmax(x, y));
  std::vector<std::size_t> map(a.nodes.size(), none);
  std::vector<bool> used(b.nodes.size(), false);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == a.nodes.size()) {
      double cost = 0.0;
      std::size_t mapped = 0;
      for (auto m : map) mapped += m != none;
      cost += static_cast<double>(a.nodes.size() - mapped) + static_cast<double>(b.nodes.size() - mapped);
      std::size_t kept = 0;
      for (auto [x, y] : a.links) {
        if (map[x] != none && map[y] != none && eb.count(std::minmax(map[x], map[y]))) ++kept;
      }
      cost += static_cast<double>(a.links.size() - kept) + static_cast<double>(b.links.size() - kept);
      best = std::min(best, cost);
      return;
    }
    map[i] = none;
    rec(i + 1);
    for (std::size_t j = 0; j < b.nodes.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      map[i] = j;
      rec(i + 1);
      map[i] = none;
      used[j] = false;
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST(EditDistance, IdenticalGraphsCostNothing) {
  const auto net = load_fixture(fixture_dir(), "chinanet");
  const auto shape = shape_of(net.topology);
  const auto c = graph_edit_costs(shape, shape, net.topology.monitors());
  EXPECT_EQ(c.g0, 0.0);
  EXPECT_TRUE(c.exact);
  EXPECT_EQ(c.g1, static_cast<double>(22 + 21));
}

TEST(EditDistance, EmptyInferredGraph) {
  const GraphShape tri{{"a", "b", "c"}, {{0, 1}, {1, 2}, {0, 2}}};
  const auto c = graph_edit_costs(tri, GraphShape{}, {});
  EXPECT_EQ(c.g0, c.g1);
  EXPECT_EQ(c.g2, 0.0);
  EXPECT_EQ(similarity(c), 0.0);
}

TEST(EditDistance, TriangleMinusEdge) {
  const GraphShape tri{{"a", "b", "c"}, {{0, 1}, {1, 2}, {0, 2}}};
  const GraphShape cut{{"a", "b", "c"}, {{0, 1}, {1, 2}}};
  const auto c = graph_edit_costs(tri, cut, {});
  EXPECT_EQ(c.g0, 1.0);
  EXPECT_EQ(c.g1, 6.0);
  EXPECT_EQ(c.g2, 5.0);
  EXPECT_EQ(c.g0, brute_force_ged(tri, cut));
  EXPECT_NEAR(similarity(c), 1.0 - 1.0 / 11.0, 1e-12);
}

TEST(EditDistance, MatchesBruteForceOnSmallGraphs) {
  auto rng = make_rng(77);
  for (int t = 0; t < 150; ++t) {
    const auto a = random_shape(rng, 2 + t % 4, 0.5);
    const auto b = random_shape(rng, 2 + (t / 4) % 4, 0.5);
    const auto c = graph_edit_costs(a, b, {});
    EXPECT_TRUE(c.exact);
    EXPECT_EQ(c.g0, brute_force_ged(a, b)) << "trial " << t;
  }
}

TEST(EditDistance, AnchorsPinMonitors) {
  // Swapping the labels of two anchored leaves costs relinking both.
  const GraphShape a{{"s", "h", "x", "y"}, {{0, 1}, {1, 2}, {1, 3}}};
  const GraphShape b{{"s", "h", "x", "y"}, {{0, 2}, {2, 1}, {2, 3}}};
  const std::vector<std::string> anchors{"s", "x", "y"};
  EXPECT_EQ(graph_edit_costs(a, a, anchors).g0, 0.0);
  EXPECT_GT(graph_edit_costs(a, b, anchors).g0, 0.0);
  EXPECT_EQ(graph_edit_costs(a, b, {}).g0, 0.0);
}

TEST(Similarity, Formula) {
  EXPECT_EQ(similarity(0.0, 4.0, 5.0), 1.0);
  EXPECT_EQ(similarity(6.0, 6.0, 0.0), 0.0);
  EXPECT_THROW(similarity(0.0, 0.0, 0.0), ArgumentError);
}

TEST(Classify, ZeroSpreadExamples) {
  const auto r = matrix({{1, 1, 0}, {0, 1, 1}, {1, 0, 1}});
  ThresholdRule rule;
  rule.spread = 0.0;
  const std::vector<double> idle{2.0, 2.0, 2.0};
  EXPECT_EQ(classify_congested_paths(idle, r, rule), (std::vector<bool>{false, false, false}));
  // Link 1 congested at 10.
  const auto row = r.multiply(std::vector<double>{1.0, 10.0, 1.0});
  EXPECT_EQ(classify_congested_paths(row, r, rule), (std::vector<bool>{true, true, false}));
}

TEST(Classify, ExpectedNoiseShiftsThreshold) {
  const auto r = matrix({{1, 1}});
  ThresholdRule rule;
  rule.spread = 0.0;
  const std::vector<double> row{5.0};
  EXPECT_TRUE(classify_congested_paths(row, r, rule)[0]);
  rule.expected_noise = {4.0};
  EXPECT_FALSE(classify_congested_paths(row, r, rule)[0]);
}

TEST(Classify, FalsePositiveRateUnderTwoPercent) {
  const auto net = load_fixture(fixture_dir(), "chinanet");
  CongestionScenario base;
  base.congestion_probability = 0.1;
  ProbeTruth truth;
  const auto series = generate_probe_series(net.routing, base, 1000, 21, &truth);
  const ThresholdRule rule;
  std::size_t clean = 0, flagged = 0;
  for (std::size_t r = 0; r < series.round_count(); ++r) {
    const auto states = classify_congested_paths(series.rounds[r], net.routing, rule);
    for (std::size_t i = 0; i < states.size(); ++i) {
      bool congested = false;
      for (auto l : net.routing.links_on_path(i)) congested = congested || truth.link_states[r][l];
      if (congested) continue;
      ++clean;
      flagged += states[i];
    }
  }
  ASSERT_GT(clean, 0u);
  EXPECT_LT(static_cast<double>(flagged) / static_cast<double>(clean), 0.02);
}

TEST(Clink, Examples) {
  const auto r = matrix({{1, 0}, {0, 1}});
  const std::vector<double> priors{0.1, 0.1};
  EXPECT_EQ(clink_detect({false, false}, r, priors), (std::vector<bool>{false, false}));
  const auto single = matrix({{1}});
  EXPECT_EQ(clink_detect({true}, single, std::vector<double>{0.2}), (std::vector<bool>{true}));
}

TEST(Clink, PrefersLikelyLinks) {
  // Two congested paths share link 1; one shared link beats two private ones.
  const auto r = matrix({{1, 1, 0}, {0, 1, 1}});
  const auto out = clink_detect({true, true}, r, std::vector<double>{0.1, 0.1, 0.1});
  EXPECT_EQ(out, (std::vector<bool>{false, true, false}));
}

TEST(Clink, InfeasibleWhenGoodPathCoversBadOne) {
  const auto r = matrix({{1, 1}, {1, 1}});
  EXPECT_THROW(clink_detect({true, false}, r, std::vector<double>{0.1, 0.1}), InfeasibleError);
}

TEST(Clink, MatchesExhaustiveOnTenLinkInstances) {
  auto rng = make_rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    RoutingMatrix r(6, 10);
    for (std::size_t i = 0; i < 6; ++i) {
      r.set(i, i, true);
      for (std::size_t j = 0; j < 10; ++j) {
        if (u(rng) < 0.3) r.set(i, j, true);
      }
    }
    std::vector<bool> links(10);
    for (std::size_t j = 0; j < 10; ++j) links[j] = u(rng) < 0.25;
    std::vector<bool> states(6, false);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 10; ++j) states[i] = states[i] || (links[j] && r.at(i, j));
    }
    const std::vector<double> priors(10, 0.1);
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < 1024; ++mask) {
      std::vector<bool> x(10);
      for (std::size_t j = 0; j < 10; ++j) x[j] = (mask >> j) & 1;
      bool consistent = true;
      for (std::size_t i = 0; i < 6 && consistent; ++i) {
        bool hit = false;
        for (std::size_t j = 0; j < 10; ++j) hit = hit || (x[j] && r.at(i, j));
        consistent = hit == states[i];
      }
      if (consistent) best = std::min(best, clink_weight(x, priors));
    }
    EXPECT_NEAR(clink_weight(clink_detect(states, r, priors), priors), best, 1e-12);
  }
}

TEST(F1, Examples) {
  EXPECT_EQ(f1_score({true, false}, {true, false}), 1.0);
  EXPECT_EQ(f1_score({true, false}, {false, false}), 0.0);
  EXPECT_DOUBLE_EQ(f1_score({true, true, true, false, false}, {true, true, false, true, false}),
                   2.0 / 3.0);
  EXPECT_EQ(f1_score({false, false}, {false, false}), 1.0);
}

TEST(Nnls, IdentityRecoversRow) {
  const auto r = matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const std::vector<double> y{1.5, 2.5, 0.5};
  const auto est = trusted_link_inference(y, r);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(est.values[j], y[j], 1e-9);
}

TEST(Nnls, FullRankMatchesDirectSolve) {
  auto rng = make_rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t np = 8, nl = 5;
    RoutingMatrix r(np, nl);
    Eigen::MatrixXd a(np, nl);
    do {
      for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t j = 0; j < nl; ++j) {
          const bool on = u(rng) < 0.5;
          r.set(i, j, on);
          a(i, j) = on;
        }
      }
    } while (a.fullPivLu().rank() < static_cast<Eigen::Index>(nl));
    Eigen::VectorXd x(nl);
    for (std::size_t j = 0; j < nl; ++j) x(j) = 0.5 + 5.0 * u(rng);
    const Eigen::VectorXd y = a * x;
    const Eigen::VectorXd direct = a.colPivHouseholderQr().solve(y);
    const std::vector<double> row(y.data(), y.data() + y.size());
    const auto est = trusted_link_inference(row, r);
    for (std::size_t j = 0; j < nl; ++j) {
      EXPECT_NEAR(est.values[j], direct(j), 1e-6 * std::abs(direct(j)));
    }
  }
}

TEST(Nnls, RankDeficientIsLeastSquaresOptimal) {
  auto rng = make_rng(56);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto net = load_fixture(fixture_dir(), "ernet");
  const auto& r = net.routing;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(r.link_count());
    for (auto& v : x) v = 0.5 + 3.0 * u(rng);
    auto y = r.multiply(x);
    for (auto& v : y) v += u(rng) - 0.5;
    const auto est = trusted_link_inference(y, r);
    std::vector<double> filled = est.values;
    for (auto& v : filled) {
      if (std::isnan(v)) v = 0.0;
    }
    auto residual = [&](const std::vector<double>& v) {
      const auto fit = r.multiply(v);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += (fit[i] - y[i]) * (fit[i] - y[i]);
      return std::sqrt(s);
    };
    EXPECT_LE(residual(filled), residual(x) + 1e-9);
    for (double v : filled) EXPECT_GE(v, 0.0);
  }
}

TEST(Nnls, UnmeasuredLinksAreNan) {
  const auto r = matrix({{1, 0}});
  const auto est = trusted_link_inference(std::vector<double>{2.0}, r);
  EXPECT_TRUE(est.identifiable[0]);
  EXPECT_FALSE(est.identifiable[1]);
  EXPECT_TRUE(std::isnan(est.values[1]));
  EXPECT_NEAR(est.values[0], 2.0, 1e-12);
}

TEST(Nrmse, Arithmetic) {
  const std::vector<double> y{3, 4};
  EXPECT_EQ(nrmse(y, y), 0.0);
  EXPECT_NEAR(nrmse(y, std::vector<double>{0, 0}), 1.0, 1e-12);
  EXPECT_NEAR(nrmse(std::vector<double>{7, 1, 2}, std::vector<double>{0, 0, 0}), 1.0, 1e-12);
  EXPECT_NEAR(nrmse(y, std::vector<double>{3, 0}), 0.8, 1e-12);
  EXPECT_THROW(nrmse(std::vector<double>{0, 0}, y), ArgumentError);
}

TEST(Nrmse, ScaleInvariant) {
  auto rng = make_rng(9);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(6), b(6), sa(6), sb(6);
    const double k = u(rng) * 100.0;
    for (std::size_t i = 0; i < 6; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      sa[i] = k * a[i];
      sb[i] = k * b[i];
    }
    EXPECT_NEAR(nrmse(a, b), nrmse(sa, sb), 1e-9);
  }
}

TEST(Report, CsvShape) {
  EvaluationReport rep;
  rep.similarity = 0.5;
  rep.metadata = {"ernet", "none", 200, 0.1, 42};
  EXPECT_EQ(EvaluationReport::csv_header(),
            "topology,method,n_probes,p,seed,similarity,f1,nrmse,objective");
  EXPECT_EQ(rep.csv_row(), "ernet,none,200,0.1,42,0.5,0,0,0");
}
