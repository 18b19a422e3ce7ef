#include "securent/obfuscation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "securent/errors.hpp"
#include "securent/text.hpp"

namespace securent {

namespace {

double sum_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains a non-finite value");
  }
}

using EdgeKey = std::pair<std::size_t, std::size_t>;

EdgeKey edge_key(std::size_t a, std::size_t b) { return std::minmax(a, b); }

}  // namespace

FakeTopology generate_fake_topology(const Topology& real, const PathSet& paths, Seed seed,
                                    double rewire_fraction) {
  if (!(rewire_fraction > 0.0 && rewire_fraction <= 1.0)) {
    throw ArgumentError("rewire_fraction must lie in (0,1]");
  }
  const auto link_count = real.link_count();
  const auto swaps = static_cast<std::size_t>(
      std::ceil(rewire_fraction * static_cast<double>(link_count) - 1e-12));
  if (swaps < 1 || link_count < 2) {
    throw ArgumentError("rewire_fraction yields no edge swap on this graph");
  }

  std::set<EdgeKey> real_edges;
  for (const auto& l : real.links()) real_edges.insert(edge_key(l.a, l.b));

  constexpr int kAttempts = 200;
  const std::size_t max_tries = 100 * swaps + 100;
  auto rng = make_rng(seed);
  std::vector<Link> links;
  bool found = false;
  for (int attempt = 0; attempt < kAttempts && !found; ++attempt) {
    links = real.links();
    std::set<EdgeKey> present = real_edges;
    std::uniform_int_distribution<std::size_t> pick(0, link_count - 1);
    std::bernoulli_distribution flip(0.5);
    std::size_t done = 0;
    for (std::size_t tries = 0; tries < max_tries && done < swaps; ++tries) {
      const auto i = pick(rng);
      const auto j = pick(rng);
      if (i == j) continue;
      auto [a, b] = std::pair(links[i].a, links[i].b);
      auto [c, d] = std::pair(links[j].a, links[j].b);
      if (flip(rng)) std::swap(c, d);
      // (a,b),(c,d) -> (a,d),(c,b)
      if (a == d || c == b) continue;
      const auto n1 = edge_key(a, d);
      const auto n2 = edge_key(c, b);
      if (n1 == n2 || present.count(n1) || present.count(n2)) continue;
      present.erase(edge_key(a, b));
      present.erase(edge_key(c, d));
      present.insert(n1);
      present.insert(n2);
      links[i].a = a;
      links[i].b = d;
      links[j].a = c;
      links[j].b = b;
      ++done;
    }
    if (done < swaps) continue;
    if (present == real_edges) continue;
    if (!is_connected(real.node_count(), links)) continue;
    found = true;
  }
  if (!found) {
    throw GenerationError("no connected degree-preserving rewiring of '" + real.name() +
                          "' differs from the real graph");
  }

  double lo = real.links().front().weight;
  double hi = lo;
  for (const auto& l : real.links()) {
    lo = std::min(lo, l.weight);
    hi = std::max(hi, l.weight);
  }
  std::uniform_real_distribution<double> len(lo, hi);
  FakeTopology fake;
  fake.lengths.reserve(links.size());
  for (auto& l : links) {
    l.weight = hi > lo ? len(rng) : lo;
    fake.lengths.push_back(l.weight);
  }
  fake.graph = real.with_links(std::move(links));

  std::vector<std::size_t> idx;
  for (const auto& [s, t] : paths.endpoints) {
    fake.paths.paths.push_back(
        shortest_path(fake.graph, fake.graph.node_index(s), fake.graph.node_index(t)));
    fake.paths.endpoints.emplace_back(s, t);
  }
  fake.routing = build_routing_matrix(fake.paths, fake.graph.link_count());
  return fake;
}

std::vector<double> fake_link_delays(std::span<const double> fake_lengths, double c) {
  if (!(c > 0.0)) throw ArgumentError("scaling constant c must be positive");
  std::vector<double> out;
  out.reserve(fake_lengths.size());
  for (double l : fake_lengths) {
    if (!(l > 0.0)) throw ArgumentError("fake link lengths must be positive");
    out.push_back(c / (l + 1.0));
  }
  return out;
}

std::vector<double> raw_noise(const RoutingMatrix& fake_routing, std::span<const double> x_prime) {
  return fake_routing.multiply(x_prime);
}

ModuleResult protection_computing_module(std::span<const double> initial,
                                         std::span<const double> target,
                                         const ModuleParams& params) {
  if (initial.size() != target.size() || initial.empty()) {
    throw ArgumentError("protection module: inputs must be non-empty and equally long");
  }
  require_finite(initial, "protection module input");
  require_finite(target, "protection module target");
  const double sum_a = sum_of(initial);
  const double sum_b = sum_of(target);
  if (!(sum_a > 0.0) || !(sum_b > 0.0)) {
    throw ArgumentError("protection module: both inputs need a positive sum");
  }

  ModuleResult r;
  r.output.assign(initial.begin(), initial.end());
  const double scale = sum_b / sum_a;
  for (auto& y : r.output) y *= scale;
  r.initial_loss = squared_distance(r.output, target);
  r.final_loss = r.initial_loss;
  if (r.initial_loss <= params.gamma * r.initial_loss) {
    r.converged = true;
    return r;
  }
  for (std::size_t t = 1; t <= params.t_max; ++t) {
    for (std::size_t i = 0; i < r.output.size(); ++i) {
      r.output[i] -= params.eta * 2.0 * (r.output[i] - target[i]);
      r.output[i] = std::max(r.output[i], 0.0);
    }
    const double current = sum_of(r.output);
    if (!(current > 0.0) || !std::isfinite(current)) {
      throw NumericError("protection module: projection lost all mass");
    }
    for (auto& y : r.output) y *= sum_b / current;
    r.iterations = t;
    r.final_loss = squared_distance(r.output, target);
    r.loss_trace.push_back(r.final_loss);
    if (!std::isfinite(r.final_loss)) throw NumericError("protection module diverged");
    if (r.final_loss <= params.gamma * r.initial_loss) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::vector<double> adjusted_noise(const RoutingMatrix& real_routing, const FakeTopology& fake,
                                   std::span<const double> x_prime, const ModuleParams& params) {
  if (real_routing.path_count() != fake.routing.path_count()) {
    throw ArgumentError("real and fake routing matrices disagree on the path count");
  }
  const auto raw = raw_noise(fake, x_prime);
  const auto target = real_routing.hop_counts();
  return protection_computing_module(raw, target, params).output;
}

std::vector<double> apply_protection(std::span<const double> y, std::span<const double> delta,
                                     double alpha) {
  if (y.size() != delta.size()) throw ArgumentError("apply_protection: length mismatch");
  if (!(alpha > 0.0)) throw ArgumentError("apply_protection: alpha must be positive");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + alpha * delta[i];
  return out;
}

double objective_score(std::span<const double> y, std::span<const double> protected_y,
                       double similarity_protected, double nrmse_trusted, double lambda1,
                       double lambda2) {
  if (y.size() != protected_y.size()) throw ArgumentError("objective_score: length mismatch");
  return objective_score(std::sqrt(squared_distance(y, protected_y)), similarity_protected,
                         nrmse_trusted, lambda1, lambda2);
}

double objective_score(double distortion, double similarity_protected, double nrmse_trusted,
                       double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ArgumentError("objective weights must be >= 0");
  return distortion - lambda1 * (1.0 - similarity_protected) + lambda2 * nrmse_trusted;
}

double scaling_constant_for_mean(std::span<const double> fake_lengths, double mean_delay) {
  if (fake_lengths.empty()) throw ArgumentError("no fake links");
  if (!(mean_delay > 0.0)) throw ArgumentError("target mean delay must be positive");
  double inv = 0.0;
  for (double l : fake_lengths) {
    if (!(l > 0.0)) throw ArgumentError("fake link lengths must be positive");
    inv += 1.0 / (l + 1.0);
  }
  return mean_delay * static_cast<double>(fake_lengths.size()) / inv;
}

ObfuscationPlan make_plan(const Network& real, Seed fake_seed, const PlanOptions& options) {
  ObfuscationPlan plan;
  plan.fake = generate_fake_topology(real.topology, real.paths, fake_seed, options.rewire_fraction);
  plan.fake_seed = fake_seed;
  plan.rewire_fraction = options.rewire_fraction;
  plan.alpha = options.alpha;
  plan.params = options.params;
  plan.fake_activity = options.fake_activity;
  plan.busy_factor = options.busy_factor;
  plan.c = options.c > 0.0 ? options.c
                           : scaling_constant_for_mean(plan.fake.lengths, options.target_mean_delay);
  plan.fake_delays = fake_link_delays(plan.fake.lengths, plan.c);
  plan.raw_noise = raw_noise(plan.fake, plan.fake_delays);
  plan.adjusted_noise = adjusted_noise(real.routing, plan.fake, plan.fake_delays, plan.params);
  return plan;
}

std::vector<double> round_noise(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                                Seed seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x = plan.fake_delays;
  for (auto& v : x) {
    if (u(rng) < plan.fake_activity) v *= plan.busy_factor;
  }
  return adjusted_noise(real_routing, plan.fake, x, plan.params);
}

NoiseProfile noise_profile(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                           std::size_t draws, Seed seed) {
  if (draws < 2) throw ArgumentError("noise profile needs at least two draws");
  const auto p = real_routing.path_count();
  std::vector<double> sum(p, 0.0);
  std::vector<double> sq(p, 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto delta = round_noise(plan, real_routing, derive_seed(seed, d));
    for (std::size_t i = 0; i < p; ++i) {
      const double v = plan.alpha * delta[i];
      sum[i] += v;
      sq[i] += v * v;
    }
  }
  NoiseProfile out;
  const auto n = static_cast<double>(draws);
  for (std::size_t i = 0; i < p; ++i) {
    const double m = sum[i] / n;
    out.mean.push_back(m);
    out.spread.push_back(std::sqrt(std::max(0.0, (sq[i] - n * m * m) / (n - 1.0))));
  }
  return out;
}

MeasurementSeries protect_series(const ObfuscationPlan& plan, const RoutingMatrix& real_routing,
                                 const MeasurementSeries& series, Seed seed) {
  MeasurementSeries out = series;
  for (std::size_t r = 0; r < out.rounds.size(); ++r) {
    const auto delta = round_noise(plan, real_routing, derive_seed(seed, r));
    out.rounds[r] = apply_protection(series.rounds[r], delta, plan.alpha);
  }
  return out;
}

UniformNoise baseline_uniform_noise(std::span<const double> y, double scale, Seed seed) {
  if (!(scale > 0.0)) throw ArgumentError("uniform noise scale must be positive");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  UniformNoise out;
  out.row.reserve(y.size());
  for (double v : y) {
    const double n = scale * u(rng);
    out.added += n;
    out.row.push_back(v + n);
  }
  return out;
}

MeasurementSeries protect_series_uniform(const MeasurementSeries& series, double scale, Seed seed,
                                         double* added_total) {
  MeasurementSeries out = series;
  double total = 0.0;
  for (std::size_t r = 0; r < out.rounds.size(); ++r) {
    auto noisy = baseline_uniform_noise(series.rounds[r], scale, derive_seed(seed, r));
    total += noisy.added;
    out.rounds[r] = std::move(noisy.row);
  }
  if (added_total) *added_total = total;
  return out;
}

double calibrate_uniform_scale(const MeasurementSeries& series, double budget, Seed seed) {
  if (!(budget > 0.0)) throw ArgumentError("noise budget must be positive");
  if (series.rounds.empty() || series.path_count() == 0) {
    throw ArgumentError("cannot calibrate on an empty series");
  }
  auto total_for = [&](double scale) {
    double added = 0.0;
    protect_series_uniform(series, scale, seed, &added);
    return added;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (total_for(hi) < budget) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("uniform scale calibration did not bracket the budget");
  }
  double mid = hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double total = total_for(mid);
    if (std::abs(total - budget) <= 1e-4 * budget) break;
    (total < budget ? lo : hi) = mid;
  }
  return mid;
}

std::size_t select_best(std::span<const double> objectives) {
  if (objectives.empty()) throw ArgumentError("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < objectives.size(); ++i) {
    if (objectives[i] < objectives[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------- plan files

std::string ObfuscationPlan::to_text() const {
  std::ostringstream out;
  out << "alpha=" << text::format_double(alpha) << '\n'
      << "c=" << text::format_double(c) << '\n'
      << "gamma=" << text::format_double(params.gamma) << '\n'
      << "eta=" << text::format_double(params.eta) << '\n'
      << "t_max=" << params.t_max << '\n'
      << "fake_seed=" << fake_seed << '\n'
      << "rewire_fraction=" << text::format_double(rewire_fraction) << '\n'
      << "fake_activity=" << text::format_double(fake_activity) << '\n'
      << "busy_factor=" << text::format_double(busy_factor) << '\n';
  out << "[fake_links]\nsource,target,length\n";
  for (const auto& l : fake.graph.links()) {
    out << fake.graph.nodes()[l.a] << ',' << fake.graph.nodes()[l.b] << ','
        << text::format_double(l.weight) << '\n';
  }
  out << "[fake_routing]\n";
  for (std::size_t j = 0; j < fake.routing.link_count(); ++j) {
    out << (j ? "," : "") << "link_" << j;
  }
  out << '\n';
  for (std::size_t i = 0; i < fake.routing.path_count(); ++i) {
    for (std::size_t j = 0; j < fake.routing.link_count(); ++j) {
      out << (j ? "," : "") << (fake.routing.at(i, j) ? 1 : 0);
    }
    out << '\n';
  }
  out << "[adjusted_noise]\npath,source,target,raw,adjusted\n";
  for (std::size_t i = 0; i < adjusted_noise.size(); ++i) {
    out << i << ',' << fake.paths.endpoints[i].first << ',' << fake.paths.endpoints[i].second
        << ',' << text::format_double(raw_noise[i]) << ','
        << text::format_double(adjusted_noise[i]) << '\n';
  }
  return out.str();
}

ObfuscationPlan ObfuscationPlan::from_text(std::string_view content, const Topology& real) {
  std::map<std::string, std::vector<std::string>> blocks;
  std::string header_text;
  std::string current;
  for (const auto& raw : text::lines(content)) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      current = std::string(line.substr(1, line.size() - 2));
      blocks[current];
      continue;
    }
    if (current.empty()) {
      header_text += std::string(line) + "\n";
    } else {
      blocks[current].emplace_back(line);
    }
  }
  const auto kv = text::parse_key_values(header_text);
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("plan: missing '") + key + "'");
    return it->second;
  };
  for (const char* b : {"fake_links", "fake_routing", "adjusted_noise"}) {
    if (!blocks.count(b) || blocks[b].empty()) {
      throw ParseError(std::string("plan: missing block [") + b + "]");
    }
  }

  ObfuscationPlan plan;
  plan.alpha = text::parse_double(need("alpha"));
  plan.c = text::parse_double(need("c"));
  plan.params.gamma = text::parse_double(need("gamma"));
  plan.params.eta = text::parse_double(need("eta"));
  plan.params.t_max = static_cast<std::size_t>(text::parse_u64(need("t_max")));
  plan.fake_seed = text::parse_u64(need("fake_seed"));
  plan.rewire_fraction = text::parse_double(need("rewire_fraction"));
  if (kv.count("fake_activity")) plan.fake_activity = text::parse_double(kv.at("fake_activity"));
  if (kv.count("busy_factor")) plan.busy_factor = text::parse_double(kv.at("busy_factor"));

  std::vector<Link> links;
  const auto& link_rows = blocks["fake_links"];
  for (std::size_t r = 1; r < link_rows.size(); ++r) {
    const auto cells = text::split(link_rows[r], ',');
    if (cells.size() != 3) throw ParseError("plan: bad fake link row");
    links.push_back({real.node_index(cells[0]), real.node_index(cells[1]),
                     text::parse_double(cells[2])});
    plan.fake.lengths.push_back(links.back().weight);
  }
  plan.fake.graph = real.with_links(std::move(links));

  const auto& routing_rows = blocks["fake_routing"];
  const auto width = text::split(routing_rows.front(), ',').size();
  if (width != plan.fake.graph.link_count()) {
    throw ParseError("plan: fake routing width does not match the fake link list");
  }
  plan.fake.routing = RoutingMatrix(routing_rows.size() - 1, width);
  for (std::size_t i = 1; i < routing_rows.size(); ++i) {
    const auto cells = text::split(routing_rows[i], ',');
    if (cells.size() != width) throw ParseError("plan: ragged fake routing row");
    for (std::size_t j = 0; j < width; ++j) {
      if (cells[j] != "0" && cells[j] != "1") throw ParseError("plan: fake routing must be 0/1");
      plan.fake.routing.set(i - 1, j, cells[j] == "1");
    }
  }

  const auto& noise_rows = blocks["adjusted_noise"];
  for (std::size_t r = 1; r < noise_rows.size(); ++r) {
    const auto cells = text::split(noise_rows[r], ',');
    if (cells.size() != 5) throw ParseError("plan: bad adjusted noise row");
    plan.fake.paths.endpoints.emplace_back(cells[1], cells[2]);
    plan.raw_noise.push_back(text::parse_double(cells[3]));
    plan.adjusted_noise.push_back(text::parse_double(cells[4]));
  }
  if (plan.adjusted_noise.size() != plan.fake.routing.path_count()) {
    throw ParseError("plan: noise rows do not match fake routing rows");
  }
  for (std::size_t i = 0; i < plan.fake.routing.path_count(); ++i) {
    const auto& [s, t] = plan.fake.paths.endpoints[i];
    plan.fake.paths.paths.push_back(shortest_path(plan.fake.graph, plan.fake.graph.node_index(s),
                                                  plan.fake.graph.node_index(t)));
  }
  plan.fake_delays = fake_link_delays(plan.fake.lengths, plan.c);
  return plan;
}

}  // namespace securent
