#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "securent/errors.hpp"
#include "securent/experiment.hpp"
#include "securent/text.hpp"
#include "support/synthetic_tree.hpp"

using namespace securent;

namespace {

ExperimentConfig small_config() {
  auto c = ExperimentConfig::from_text(
      "topology=ernet\nprobe_counts=200,400\nprobabilities=0.1\ntrials=2\nutility_rounds=30\n");
  return c;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Config, TopologyAloneIsComplete) {
  const auto c = ExperimentConfig::from_text("topology=agis\n");
  EXPECT_EQ(c.topology, "agis");
  EXPECT_EQ(c.probe_counts.size(), 9u);
  EXPECT_EQ(c.probe_counts.front(), 200u);
  EXPECT_EQ(c.probe_counts.back(), 1800u);
  EXPECT_EQ(c.probabilities, (std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5}));
  EXPECT_EQ(c.low_p, 0.1);
  EXPECT_EQ(c.high_p, 0.4);
  EXPECT_EQ(c.methods.size(), 3u);
  EXPECT_GE(c.trials, 1u);
}

TEST(Config, TextRoundTrip) {
  auto c = small_config();
  c.methods = {Method::securent, Method::none};
  c.alphas = {0.25, 3.0};
  c.noise_aware = false;
  const auto back = ExperimentConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
}

TEST(Config, CommentsAndWhitespace) {
  const auto c = ExperimentConfig::from_text("# grid\n topology = ganet \n\nmethods=none, uniform\n");
  EXPECT_EQ(c.topology, "ganet");
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::none, Method::uniform_baseline}));
}

TEST(Config, Errors) {
  EXPECT_THROW(ExperimentConfig::from_text("topology=ernet\nbogus=1\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::from_text("trials=0\n"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_text("probe_counts=\n"), std::exception);
  EXPECT_THROW(ExperimentConfig::from_text("methods=best\n"), ParseError);
  EXPECT_THROW(ExperimentConfig::from_text("probabilities=0.1,1.5\n"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_text("gamma=1.5\n"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_text("alphas=0\n"), ArgumentError);
  EXPECT_THROW(ExperimentConfig::from_file("/nonexistent/config.txt"), FileError);
}

TEST(Config, MissingTopologyFile) {
  ExperimentConfig c;
  c.topology = "/nonexistent/net.graphml";
  EXPECT_THROW(load_experiment_network(c), FileError);
}

TEST(Config, GraphmlPathWithSiblingMonitors) {
  ExperimentConfig c;
  c.topology = (fixture_dir() / "agis.graphml").string();
  const auto net = load_experiment_network(c);
  EXPECT_EQ(net.routing.path_count(), 14u);
}

TEST(Seeds, DependOnlyOnCellAndTrial) {
  const Cell a{200, 0.1, ""};
  const Cell b{400, 0.1, ""};
  EXPECT_EQ(trial_seed(1, "ernet", a, 0), trial_seed(1, "ernet", a, 0));
  std::set<Seed> seen{trial_seed(1, "ernet", a, 0), trial_seed(1, "ernet", a, 1),
                      trial_seed(1, "ernet", b, 0), trial_seed(1, "agis", a, 0),
                      trial_seed(2, "ernet", a, 0)};
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Trial, AddingMethodsKeepsExistingResults) {
  auto only = small_config();
  only.methods = {Method::none};
  auto all = small_config();
  const auto net = load_experiment_network(only);
  const Cell cell{200, 0.1, ""};
  const auto seed = trial_seed(only.seed, only.topology, cell, 0);
  const auto a = run_trial(net, only, cell, seed);
  const auto b = run_trial(net, all, cell, seed);
  ASSERT_EQ(a.reports.size(), 1u);
  ASSERT_EQ(b.reports.size(), 3u);
  EXPECT_EQ(a.reports[0].csv_row(), b.reports[0].csv_row());
}

TEST(Grid, RowCountAndOrder) {
  const auto c = small_config();
  const auto net = load_experiment_network(c);
  const auto cells = experiment_cells(c);
  ASSERT_EQ(cells.size(), 2u);
  const auto result = run_grid(net, c, cells, 2);
  EXPECT_TRUE(result.errors.empty());
  EXPECT_EQ(result.rows.size(), cells.size() * c.trials * c.methods.size());
  EXPECT_EQ(result.summary.size(), cells.size() * c.methods.size());
  EXPECT_EQ(result.rows[0].metadata.method, "none");
  EXPECT_EQ(result.rows[1].metadata.method, "securent");
  EXPECT_EQ(result.rows[0].metadata.n_probes, 200u);
  EXPECT_EQ(result.rows.back().metadata.n_probes, 400u);
  EXPECT_EQ(line_count(result.trials_csv()), result.rows.size() + 1);
  EXPECT_EQ(line_count(result.summary_csv()), result.summary.size() + 1);
}

TEST(Grid, IndependentOfWorkerCount) {
  const auto c = small_config();
  const auto net = load_experiment_network(c);
  const auto cells = experiment_cells(c);
  const auto one = run_grid(net, c, cells, 1);
  const auto many = run_grid(net, c, cells, 8);
  EXPECT_EQ(one.trials_csv(), many.trials_csv());
  EXPECT_EQ(one.summary_csv(), many.summary_csv());
  EXPECT_EQ(one.trials_csv(), run_grid(net, c, cells, 1).trials_csv());
}

TEST(Grid, MetricsInRange) {
  const auto c = small_config();
  const auto net = load_experiment_network(c);
  for (const auto& row : run_grid(net, c, experiment_cells(c), 2).rows) {
    EXPECT_GE(row.similarity, 0.0);
    EXPECT_LE(row.similarity, 1.0);
    EXPECT_GE(row.f1, 0.0);
    EXPECT_LE(row.f1, 1.0);
    EXPECT_GE(row.nrmse, 0.0);
  }
}

TEST(Grid, NoProtectionOnSyntheticTreeIsNearPerfect) {
  auto c = small_config();
  c.methods = {Method::none};
  c.trials = 5;
  for (Seed s = 0; s < 5; ++s) {
    const auto tree = synth::make_synthetic_tree(s);
    const auto result = run_grid(tree.network, c, {Cell{3000, 0.3, ""}}, 1);
    ASSERT_TRUE(result.errors.empty());
    EXPECT_GE(result.summary[0].similarity_mean, 0.95) << "tree " << s;
  }
}

TEST(Grid, SecurentLowersSimilarityOverThirtyPairedTrials) {
  auto c = small_config();
  c.methods = {Method::none, Method::securent};
  c.trials = 30;
  const auto net = load_experiment_network(c);
  const auto result = run_grid(net, c, {Cell{1000, 0.1, ""}}, 1);
  ASSERT_EQ(result.summary.size(), 2u);
  EXPECT_LT(result.summary[1].similarity_mean, result.summary[0].similarity_mean);
}

TEST(Figures, CellsFollowTheirAxes) {
  const ExperimentConfig c;
  const auto f3 = figure_cells(Figure::fig3, c);
  ASSERT_EQ(f3.size(), 9u);
  for (const auto& cell : f3) EXPECT_EQ(cell.p, c.p);
  const auto f4 = figure_cells(Figure::fig4, c);
  ASSERT_EQ(f4.size(), 2u);
  EXPECT_EQ(f4[0].label, "low");
  EXPECT_EQ(f4[0].p, 0.1);
  EXPECT_EQ(f4[1].label, "high");
  EXPECT_EQ(f4[1].p, 0.4);
  const auto f5 = figure_cells(Figure::fig5, c);
  ASSERT_EQ(f5.size(), 5u);
  for (const auto& cell : f5) EXPECT_EQ(cell.n_probes, c.probes);
  EXPECT_EQ(parse_figure("fig4"), Figure::fig4);
  EXPECT_THROW(parse_figure("fig9"), std::exception);
}

TEST(Figures, CsvShapes) {
  auto c = small_config();
  c.trials = 1;
  c.probe_counts = {200, 400};
  c.probes = 200;
  c.probabilities = {0.1, 0.3};
  const auto net = load_experiment_network(c);
  const std::vector<std::pair<Figure, std::string>> expect{
      {Figure::fig3, "topology,n_probes,method,trials,similarity_mean,similarity_stderr"},
      {Figure::fig4, "topology,level,p,method,trials,f1_mean,f1_stderr"},
      {Figure::fig5,
       "topology,p,method,trials,inference_similarity_mean,inference_similarity_stderr"}};
  for (const auto& [fig, header] : expect) {
    const auto result = run_grid(net, c, figure_cells(fig, c), 1);
    const auto csv = figure_csv(fig, result);
    const auto rows = text::lines(csv);
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], header);
    EXPECT_EQ(rows.size(), 1 + figure_cells(fig, c).size() * 3);
    std::set<std::string> methods;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto cols = text::split(rows[i], ',');
      EXPECT_EQ(cols[0], "ernet");
      for (const auto& col : cols) {
        if (col == "none" || col == "securent" || col == "uniform-baseline") methods.insert(col);
      }
    }
    EXPECT_EQ(methods.size(), 3u);
  }
}
