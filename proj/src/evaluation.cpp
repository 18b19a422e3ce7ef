#include "securent/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "securent/errors.hpp"
#include "securent/text.hpp"

namespace securent {

GraphShape shape_of(const Topology& topology) {
  GraphShape g;
  g.nodes = topology.nodes();
  for (const auto& l : topology.links()) g.links.emplace_back(l.a, l.b);
  return g;
}

GraphShape shape_of(const InferredTopology& inferred) {
  return GraphShape{inferred.nodes, inferred.links};
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kSearchBudget = 2'000'000;

struct Side {
  std::size_t n = 0;
  std::vector<std::set<std::size_t>> adj;
  std::size_t edges = 0;
};

Side make_side(const GraphShape& g) {
  Side s;
  s.n = g.nodes.size();
  s.adj.resize(s.n);
  for (const auto& [a, b] : g.links) {
    if (a == b || s.adj[a].count(b)) continue;
    s.adj[a].insert(b);
    s.adj[b].insert(a);
    ++s.edges;
  }
  return s;
}

// Branch-and-bound over injective maps of the left side's free nodes.
class EditSearch {
 public:
  EditSearch(const Side& left, const Side& right, std::vector<std::size_t> map,
             std::vector<std::size_t> free_left, std::vector<std::size_t> free_right)
      : left_(left), right_(right), map_(std::move(map)), free_left_(std::move(free_left)),
        free_right_(std::move(free_right)) {
    used_.assign(right_.n, false);
    for (auto v : map_) {
      if (v < right_.n) used_[v] = true;
    }
    std::vector<std::size_t> pos(left_.n, 0);  // 0 = fixed, i+1 = free slot i
    for (std::size_t i = 0; i < free_left_.size(); ++i) pos[free_left_[i]] = i + 1;
    suffix_.assign(free_left_.size() + 1, 0);
    for (std::size_t u = 0; u < left_.n; ++u) {
      for (auto w : left_.adj[u]) {
        if (u < w) {
          const auto p = std::max(pos[u], pos[w]);
          if (p > 0) ++suffix_[p - 1];
        }
      }
    }
    for (std::size_t i = free_left_.size(); i-- > 0;) suffix_[i] += suffix_[i + 1];
    mapped_ = 0;
    for (auto v : map_) mapped_ += v < right_.n;
    preserved_ = 0;
    for (std::size_t u = 0; u < left_.n; ++u) {
      if (pos[u] || map_[u] == kNone) continue;
      for (auto w : left_.adj[u]) {
        if (u < w && !pos[w] && map_[w] != kNone && right_.adj[map_[u]].count(map_[w])) {
          ++preserved_;
        }
      }
    }
  }

  double run(bool& exact) {
    best_ = greedy();
    expansions_ = 0;
    aborted_ = false;
    dfs(0, free_right_.size());
    exact = !aborted_;
    return static_cast<double>(best_);
  }

 private:
  long cost() const {
    return static_cast<long>(left_.n + right_.n + left_.edges + right_.edges) -
           2 * static_cast<long>(mapped_ + preserved_);
  }

  std::size_t gain(std::size_t u, std::size_t v) const {
    std::size_t g = 0;
    for (auto w : left_.adj[u]) {
      if (map_[w] != kNone && map_[w] != kUnset && right_.adj[v].count(map_[w])) ++g;
    }
    return g;
  }

  void assign(std::size_t u, std::size_t v, std::size_t g) {
    map_[u] = v;
    used_[v] = true;
    ++mapped_;
    preserved_ += g;
  }

  void unassign(std::size_t u, std::size_t v, std::size_t g) {
    map_[u] = kUnset;
    used_[v] = false;
    --mapped_;
    preserved_ -= g;
  }

  long greedy() {
    for (auto u : free_left_) map_[u] = kUnset;
    std::vector<std::pair<std::size_t, std::size_t>> made;
    for (auto u : free_left_) {
      std::size_t best_v = kNone;
      std::size_t best_g = 0;
      for (auto v : free_right_) {
        if (used_[v]) continue;
        const auto g = gain(u, v);
        if (best_v == kNone || g > best_g ||
            (g == best_g && degree_gap(u, v) < degree_gap(u, best_v))) {
          best_v = v;
          best_g = g;
        }
      }
      if (best_v == kNone) {
        map_[u] = kNone;
        continue;
      }
      assign(u, best_v, best_g);
      made.emplace_back(u, best_g);
    }
    const long c = cost();
    for (auto it = made.rbegin(); it != made.rend(); ++it) unassign(it->first, map_[it->first], it->second);
    for (auto u : free_left_) map_[u] = kUnset;
    return c;
  }

  std::size_t degree_gap(std::size_t u, std::size_t v) const {
    const auto a = left_.adj[u].size();
    const auto b = right_.adj[v].size();
    return a > b ? a - b : b - a;
  }

  void dfs(std::size_t i, std::size_t available) {
    if (aborted_) return;
    if (++expansions_ > kSearchBudget) {
      aborted_ = true;
      return;
    }
    const std::size_t rem = free_left_.size() - i;
    const long bound = cost() - 2 * static_cast<long>(std::min(rem, available) + suffix_[i]);
    if (bound >= best_) return;
    if (i == free_left_.size()) {
      best_ = cost();
      return;
    }
    const auto u = free_left_[i];
    for (auto v : free_right_) {
      if (used_[v]) continue;
      const auto g = gain(u, v);
      assign(u, v, g);
      dfs(i + 1, available - 1);
      unassign(u, v, g);
    }
    map_[u] = kNone;
    dfs(i + 1, available);
    map_[u] = kUnset;
  }

  static constexpr std::size_t kUnset = kNone - 1;

  const Side& left_;
  const Side& right_;
  std::vector<std::size_t> map_;
  std::vector<std::size_t> free_left_;
  std::vector<std::size_t> free_right_;
  std::vector<bool> used_;
  std::vector<std::size_t> suffix_;
  std::size_t mapped_ = 0;
  std::size_t preserved_ = 0;
  long best_ = 0;
  std::size_t expansions_ = 0;
  bool aborted_ = false;

 public:
  static std::size_t unset() { return kUnset; }
};

}  // namespace

EditCosts graph_edit_costs(const GraphShape& real, const GraphShape& inferred,
                           std::span<const std::string> anchors) {
  const auto a = make_side(real);
  const auto b = make_side(inferred);
  EditCosts c;
  c.g1 = static_cast<double>(a.n + a.edges);
  c.g2 = static_cast<double>(b.n + b.edges);
  if (b.n == 0 || a.n == 0) {
    c.g0 = c.g1 + c.g2;
    return c;
  }

  const std::set<std::string> anchor_set(anchors.begin(), anchors.end());
  std::map<std::string, std::size_t> b_index;
  for (std::size_t i = 0; i < b.n; ++i) b_index.emplace(inferred.nodes[i], i);
  std::vector<std::size_t> map_ab(a.n, EditSearch::unset());
  std::vector<bool> b_fixed(b.n, false);
  std::vector<std::size_t> free_a;
  for (std::size_t i = 0; i < a.n; ++i) {
    if (anchor_set.count(real.nodes[i])) {
      const auto it = b_index.find(real.nodes[i]);
      if (it != b_index.end() && !b_fixed[it->second]) {
        map_ab[i] = it->second;
        b_fixed[it->second] = true;
      } else {
        map_ab[i] = kNone;
      }
    } else {
      free_a.push_back(i);
    }
  }
  std::vector<std::size_t> free_b;
  for (std::size_t j = 0; j < b.n; ++j) {
    if (!b_fixed[j] && !anchor_set.count(inferred.nodes[j])) free_b.push_back(j);
  }

  // Search over the side with fewer free nodes; costs are symmetric.
  const bool swap_sides = free_b.size() < free_a.size();
  const Side& left = swap_sides ? b : a;
  const Side& right = swap_sides ? a : b;
  std::vector<std::size_t> map(left.n, EditSearch::unset());
  if (!swap_sides) {
    map = map_ab;
  } else {
    for (std::size_t j = 0; j < b.n; ++j) map[j] = anchor_set.count(inferred.nodes[j]) ? kNone : EditSearch::unset();
    for (std::size_t i = 0; i < a.n; ++i) {
      if (map_ab[i] != kNone && map_ab[i] != EditSearch::unset()) map[map_ab[i]] = i;
    }
  }
  auto free_left = swap_sides ? free_b : free_a;
  const auto free_right = swap_sides ? free_a : free_b;
  // Most constrained nodes first: those touching fixed nodes.
  std::stable_sort(free_left.begin(), free_left.end(), [&](std::size_t x, std::size_t y) {
    auto fixed_neighbours = [&](std::size_t u) {
      std::size_t n = 0;
      for (auto w : left.adj[u]) n += map[w] != EditSearch::unset() && map[w] != kNone;
      return n;
    };
    return fixed_neighbours(x) > fixed_neighbours(y);
  });
  EditSearch search(left, right, map, free_left, free_right);
  bool exact = true;
  c.g0 = search.run(exact);
  c.exact = exact;
  return c;
}

EditCosts graph_edit_costs(const Topology& real, const InferredTopology& inferred) {
  return graph_edit_costs(shape_of(real), shape_of(inferred), real.monitors());
}

double similarity(double g0, double g1, double g2) {
  if (!(g1 + g2 > 0.0)) throw ArgumentError("similarity of two empty graphs is undefined");
  return std::clamp(1.0 - g0 / (g1 + g2), 0.0, 1.0);
}

// ---------------------------------------------------------------- congestion

std::vector<bool> classify_congested_paths(std::span<const double> row,
                                           const RoutingMatrix& routing,
                                           const ThresholdRule& rule) {
  if (row.size() != routing.path_count()) {
    throw ArgumentError("classify: row length does not match the routing matrix");
  }
  std::vector<bool> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double h = static_cast<double>(routing.row_sum(i));
    const double offset = rule.expected_noise.empty() ? 0.0 : rule.expected_noise.at(i);
    const double extra = rule.noise_spread.empty() ? 0.0 : rule.noise_spread.at(i);
    const double margin = rule.k * std::sqrt(rule.spread * rule.spread * h + extra * extra);
    out[i] = row[i] > h * rule.idle_mean + offset + margin;
  }
  return out;
}

double clink_weight(const std::vector<bool>& links, std::span<const double> link_priors) {
  double w = 0.0;
  for (std::size_t j = 0; j < links.size(); ++j) {
    if (links[j]) w += -std::log(link_priors[j]);
  }
  return w;
}

std::vector<bool> clink_detect(const std::vector<bool>& path_states, const RoutingMatrix& routing,
                               std::span<const double> link_priors) {
  const auto np = routing.path_count();
  const auto nl = routing.link_count();
  if (path_states.size() != np) throw ArgumentError("clink: path state length mismatch");
  if (link_priors.size() != nl) throw ArgumentError("clink: prior length mismatch");
  for (double p : link_priors) {
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("clink: priors must lie in (0,1)");
  }

  std::vector<bool> good(nl, false);
  for (std::size_t i = 0; i < np; ++i) {
    if (path_states[i]) continue;
    for (std::size_t j = 0; j < nl; ++j) {
      if (routing.at(i, j)) good[j] = true;
    }
  }
  std::vector<std::size_t> bad_paths;
  for (std::size_t i = 0; i < np; ++i) {
    if (path_states[i]) bad_paths.push_back(i);
  }
  std::vector<bool> result(nl, false);
  if (bad_paths.empty()) return result;

  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < nl; ++j) {
    if (good[j]) continue;
    for (auto i : bad_paths) {
      if (routing.at(i, j)) {
        candidates.push_back(j);
        break;
      }
    }
  }
  // covers[c] = bad-path slots covered by candidate c
  std::vector<std::vector<std::size_t>> covers(candidates.size());
  std::vector<std::vector<std::size_t>> options(bad_paths.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t b = 0; b < bad_paths.size(); ++b) {
      if (routing.at(bad_paths[b], candidates[c])) {
        covers[c].push_back(b);
        options[b].push_back(c);
      }
    }
  }
  for (std::size_t b = 0; b < bad_paths.size(); ++b) {
    if (options[b].empty()) {
      throw InfeasibleError("congested path " + std::to_string(bad_paths[b]) +
                            " has no link outside the uncongested paths");
    }
  }
  std::vector<double> weight(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) weight[c] = -std::log(link_priors[candidates[c]]);

  std::vector<bool> chosen(candidates.size(), false);
  if (candidates.size() <= 20) {
    std::vector<std::size_t> coverage(bad_paths.size(), 0);
    std::vector<bool> best;
    double best_w = std::numeric_limits<double>::infinity();
    double current = 0.0;
    auto dfs = [&](auto&& self) -> void {
      if (current >= best_w - 1e-12) return;
      std::size_t open = bad_paths.size();
      for (std::size_t b = 0; b < bad_paths.size(); ++b) {
        if (!coverage[b]) {
          open = b;
          break;
        }
      }
      if (open == bad_paths.size()) {
        best_w = current;
        best = chosen;
        return;
      }
      for (auto c : options[open]) {
        if (chosen[c]) continue;
        chosen[c] = true;
        current += weight[c];
        for (auto b : covers[c]) ++coverage[b];
        self(self);
        for (auto b : covers[c]) --coverage[b];
        current -= weight[c];
        chosen[c] = false;
      }
    };
    dfs(dfs);
    chosen = best;
  } else {
    std::vector<bool> covered(bad_paths.size(), false);
    std::size_t left = bad_paths.size();
    while (left) {
      std::size_t pick = candidates.size();
      double best_ratio = -1.0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (chosen[c]) continue;
        std::size_t fresh = 0;
        for (auto b : covers[c]) fresh += !covered[b];
        if (!fresh) continue;
        const double ratio = static_cast<double>(fresh) / weight[c];
        if (ratio > best_ratio) {
          best_ratio = ratio;
          pick = c;
        }
      }
      chosen[pick] = true;
      for (auto b : covers[pick]) {
        if (!covered[b]) {
          covered[b] = true;
          --left;
        }
      }
    }
  }
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (chosen[c]) result[candidates[c]] = true;
  }
  return result;
}

double f1_score(const std::vector<bool>& truth, const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size()) throw ArgumentError("f1: length mismatch");
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tp += truth[i] && predicted[i];
    fp += !truth[i] && predicted[i];
    fn += truth[i] && !predicted[i];
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

// ---------------------------------------------------------------- link inference

namespace {

// Gaussian elimination with partial pivoting; nullopt when (near) singular.
std::optional<std::vector<double>> solve_dense(std::vector<double> a, std::vector<double> b) {
  const auto n = b.size();
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (!(std::abs(a[piv * n + col]) > 1e-10 * scale)) return std::nullopt;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / a[i * n + i];
  }
  return x;
}

}  // namespace

LinkEstimate trusted_link_inference(std::span<const double> row, const RoutingMatrix& routing,
                                    const NnlsOptions& options) {
  const auto np = routing.path_count();
  const auto nl = routing.link_count();
  if (row.size() != np) throw ArgumentError("trusted inference: row length mismatch");
  const auto colsum = routing.column_sums();
  if (std::all_of(colsum.begin(), colsum.end(), [](std::size_t s) { return s == 0; })) {
    throw ArgumentError("trusted inference: routing matrix is all zero");
  }
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < nl; ++j) {
    if (colsum[j]) cols.push_back(j);
  }
  const auto k = cols.size();
  // Normal equations restricted to measured links.
  std::vector<double> gram(k * k, 0.0);
  std::vector<double> rhs(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < np; ++i) {
      if (!routing.at(i, cols[a])) continue;
      rhs[a] += row[i];
      for (std::size_t b = 0; b < k; ++b) gram[a * k + b] += routing.at(i, cols[b]) ? 1.0 : 0.0;
    }
  }
  double rhs_norm = 0.0;
  for (double v : rhs) rhs_norm = std::max(rhs_norm, std::abs(v));
  const double tol = options.tolerance * std::max(1.0, rhs_norm);

  std::vector<double> x(k, 0.0);
  std::vector<double> grad(k);  // gram * x - rhs
  for (std::size_t a = 0; a < k; ++a) grad[a] = -rhs[a];
  LinkEstimate est;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    for (std::size_t a = 0; a < k; ++a) {
      const double next = std::max(0.0, x[a] - grad[a] / gram[a * k + a]);
      const double delta = next - x[a];
      if (delta != 0.0) {
        for (std::size_t b = 0; b < k; ++b) grad[b] += gram[b * k + a] * delta;
        x[a] = next;
      }
    }
    est.iterations = it + 1;
    // Projected gradient: KKT residual of the nonnegativity-constrained problem.
    double kkt = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double g = x[a] > 0.0 ? std::abs(grad[a]) : std::max(0.0, -grad[a]);
      kkt = std::max(kkt, g);
    }
    if (kkt <= tol) break;
  }
  // Coordinate descent settles the active set quickly but creeps toward the
  // optimum; finish with an exact solve on the free variables when that keeps
  // them positive and the bound variables still satisfy KKT.
  std::vector<std::size_t> free;
  for (std::size_t a = 0; a < k; ++a) {
    if (x[a] > 0.0) free.push_back(a);
  }
  if (!free.empty()) {
    const auto m = free.size();
    std::vector<double> sub(m * m);
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) {
      b[i] = rhs[free[i]];
      for (std::size_t j = 0; j < m; ++j) sub[i * m + j] = gram[free[i] * k + free[j]];
    }
    if (auto z = solve_dense(std::move(sub), std::move(b))) {
      std::vector<double> trial = x;
      bool ok = true;
      for (std::size_t i = 0; i < m; ++i) {
        ok = ok && (*z)[i] > 0.0;
        trial[free[i]] = (*z)[i];
      }
      for (std::size_t a = 0; a < k && ok; ++a) {
        if (trial[a] > 0.0) continue;
        double g = -rhs[a];
        for (std::size_t b2 = 0; b2 < k; ++b2) g += gram[a * k + b2] * trial[b2];
        ok = g >= -tol;
      }
      if (ok) x = std::move(trial);
    }
  }
  est.values.assign(nl, std::numeric_limits<double>::quiet_NaN());
  est.identifiable.assign(nl, false);
  for (std::size_t a = 0; a < k; ++a) {
    est.values[cols[a]] = x[a];
    est.identifiable[cols[a]] = true;
  }
  return est;
}

double nrmse(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw ArgumentError("nrmse: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (truth[i] - estimate[i]) * (truth[i] - estimate[i]);
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0)) throw ArgumentError("nrmse: reference vector is all zero");
  return std::sqrt(num / den);
}

double nrmse(std::span<const double> truth, const LinkEstimate& estimate) {
  if (truth.size() != estimate.values.size()) throw ArgumentError("nrmse: length mismatch");
  std::vector<double> t;
  std::vector<double> e;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (!estimate.identifiable[j]) continue;
    t.push_back(truth[j]);
    e.push_back(estimate.values[j]);
  }
  return nrmse(t, e);
}

std::string EvaluationReport::csv_header() {
  return "topology,method,n_probes,p,seed,similarity,f1,nrmse,objective";
}

std::string EvaluationReport::csv_row() const {
  std::ostringstream out;
  out << metadata.topology << ',' << metadata.method << ',' << metadata.n_probes << ','
      << text::format_g9(metadata.congestion_probability) << ',' << metadata.seed << ','
      << text::format_g9(similarity) << ',' << text::format_g9(f1) << ','
      << text::format_g9(nrmse) << ',' << text::format_g9(objective);
  return out.str();
}

}  // namespace securent
