#ifndef EPDQ_TRANSPORT_HPP
#define EPDQ_TRANSPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "epdq/measures.hpp"

namespace epdq {

/// One routed pair of an optimal plan. Index kDiagonal stands for the
/// diagonal sink on either side.
struct TransportPair {
  static constexpr std::int32_t kDiagonal = -1;
  std::int32_t source = 0;
  std::int32_t target = 0;
  double mass = 0.0;
};

struct TransportPlan {
  std::vector<TransportPair> pairs;
  double cost_p = 0.0;  // sum of mass * dist^p (max dist for the bottleneck plan)
  double p = 2.0;
};

struct OtResult {
  double value = 0.0;
  TransportPlan plan;
};

namespace detail {

/// Network simplex for uncapacitated bipartite transportation instances with
/// a diagonal depot on each side.
///
/// Sources 0..ns-1 carry integer supplies, sinks 0..nt-1 integer demands
/// (balanced). Arcs are source-major (CSR). The instance layout contract:
/// every source's arc list ends with an arc to sink nt-1 (the depot), and the
/// last source (the opposite depot) lists arcs to every sink in order. The
/// route-everything-through-the-depots plan then forms a feasible spanning
/// tree, which is the initial basis; no artificial arcs are needed and node
/// potentials stay on the scale of real arc costs.
///
/// Entering arcs are found by blocked search over reduced costs; the leaving
/// arc uses the strongly-feasible-tree rule (last blocking arc around the
/// cycle, traversed from the apex), which rules out degenerate cycling.
template <class CostFn>
class TransportSimplex {
public:
  TransportSimplex(std::vector<std::int64_t> supplies, std::vector<std::int64_t> demands,
                   std::vector<std::uint32_t> arc_targets, std::vector<std::size_t> arc_offsets, CostFn cost,
                   double cost_upper_bound)
      : supplies_(std::move(supplies)),
        demands_(std::move(demands)),
        targets_(std::move(arc_targets)),
        offsets_(std::move(arc_offsets)),
        cost_(cost) {
    ns_ = static_cast<std::int32_t>(supplies_.size());
    nt_ = static_cast<std::int32_t>(demands_.size());
    n_nodes_ = ns_ + nt_;
    root_ = n_nodes_ - 1;  // the sink-side depot
    eps_ = 1e-12 * (cost_upper_bound + 1.0);
  }

  void solve() {
    init_tree();
    const std::size_t arc_count = targets_.size();
    if (arc_count == 0) return;
    const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(static_cast<double>(arc_count))));
    const std::uint64_t pivot_limit = 512ULL * n_nodes_ + 4ULL * arc_count + 1000000ULL;
    std::uint64_t pivots = 0;

    std::size_t cursor = 0;
    std::int32_t cursor_src = 0;
    std::size_t since_candidate = 0;
    while (since_candidate < arc_count) {
      double best_rc = -eps_;
      std::size_t best_arc = arc_count;
      std::int32_t best_src = -1;
      for (std::size_t step = 0; step < block; ++step) {
        if (cursor >= arc_count) {
          cursor = 0;
          cursor_src = 0;
        }
        while (cursor >= offsets_[cursor_src + 1]) ++cursor_src;
        const std::int32_t w = ns_ + static_cast<std::int32_t>(targets_[cursor]);
        const double rc = cost_(cursor_src, targets_[cursor]) - pi_[cursor_src] + pi_[w];
        if (rc < best_rc && pred_arc_[cursor_src] != static_cast<std::int64_t>(cursor) &&
            pred_arc_[w] != static_cast<std::int64_t>(cursor)) {
          best_rc = rc;
          best_arc = cursor;
          best_src = cursor_src;
        }
        ++cursor;
      }
      since_candidate += block;
      if (best_arc < arc_count) {
        pivot(best_src, ns_ + static_cast<std::int32_t>(targets_[best_arc]), static_cast<std::int64_t>(best_arc));
        since_candidate = 0;
        if (++pivots > pivot_limit) throw std::runtime_error("transport solver: pivot limit exceeded");
      }
    }
  }

  struct Stats {
    std::uint64_t pivots = 0;
    std::uint64_t degenerate_pivots = 0;
    std::uint64_t scanned_arcs = 0;
  };
  const Stats& stats() const { return stats_; }

  /// Basic arcs with positive flow.
  template <class Fn>
  void for_each_flow(Fn fn) const {
    for (std::int32_t v = 0; v < n_nodes_; ++v) {
      if (v == root_ || flow_[v] <= 0) continue;
      const std::int32_t a = pred_up_[v] ? v : parent_[v];
      const std::int32_t b = pred_up_[v] ? parent_[v] : v;
      fn(a, b - ns_, flow_[v]);  // a: source index, b - ns_: sink index
    }
  }

private:
  void init_tree() {
    parent_.assign(n_nodes_, -1);
    pred_arc_.assign(n_nodes_, -1);
    pred_up_.assign(n_nodes_, true);
    depth_.assign(n_nodes_, 0);
    pi_.assign(n_nodes_, 0.0);
    flow_.assign(n_nodes_, 0);
    children_.assign(n_nodes_, {});

    const std::int32_t depot_src = ns_ - 1;
    // Every source hangs off the sink depot through its own depot arc; every
    // other sink hangs off the source depot. All these arcs exist by the
    // layout contract, and all nonzero supplies/demands make the tree
    // strongly feasible (the single zero-flow depot-depot arc points to root).
    for (std::int32_t s = 0; s < ns_; ++s) {
      parent_[s] = root_;
      pred_arc_[s] = static_cast<std::int64_t>(offsets_[s + 1]) - 1;
      pred_up_[s] = true;
      depth_[s] = 1;
      // The source depot forwards everything to the sinks hanging below it,
      // so its own arc to the sink depot carries nothing.
      flow_[s] = s == depot_src ? 0 : supplies_[s];
      pi_[s] = cost_(s, static_cast<std::uint32_t>(nt_ - 1));
      children_[root_].push_back(s);
    }
    for (std::int32_t t = 0; t < nt_ - 1; ++t) {
      const std::int32_t v = ns_ + t;
      parent_[v] = depot_src;
      pred_arc_[v] = static_cast<std::int64_t>(offsets_[depot_src]) + t;
      pred_up_[v] = false;
      depth_[v] = 2;
      flow_[v] = demands_[t];
      pi_[v] = pi_[depot_src] - cost_(depot_src, static_cast<std::uint32_t>(t));
      children_[depot_src].push_back(v);
    }
  }

  // Entering arc u -> w with reduced cost < 0; pushes flow around the tree
  // cycle, removes the blocking arc, re-hangs the cut subtree under the
  // entering arc and refreshes depths and potentials there.
  void pivot(std::int32_t u, std::int32_t w, std::int64_t entering_arc) {
    path_u_.clear();
    path_w_.clear();
    std::int32_t x = u, y = w;
    while (depth_[x] > depth_[y]) {
      path_u_.push_back(x);
      x = parent_[x];
    }
    while (depth_[y] > depth_[x]) {
      path_w_.push_back(y);
      y = parent_[y];
    }
    while (x != y) {
      path_u_.push_back(x);
      path_w_.push_back(y);
      x = parent_[x];
      y = parent_[y];
    }
    // Cycle in circulation order, starting at the apex: down the u-side,
    // across the entering arc, up the w-side. A node on the u-side decreases
    // its arc flow when the arc points toward its parent; on the w-side when
    // it points away from it. Ties keep the last blocking arc.
    std::int64_t theta = std::numeric_limits<std::int64_t>::max();
    std::int32_t leave = -1;
    bool leave_on_u_side = true;
    for (std::size_t i = path_u_.size(); i-- > 0;) {
      const std::int32_t node = path_u_[i];
      if (pred_up_[node] && flow_[node] <= theta) {
        theta = flow_[node];
        leave = node;
        leave_on_u_side = true;
      }
    }
    for (const std::int32_t node : path_w_) {
      if (!pred_up_[node] && flow_[node] <= theta) {
        theta = flow_[node];
        leave = node;
        leave_on_u_side = false;
      }
    }
    if (leave < 0) throw std::runtime_error("transport solver: unbounded pivot");

    for (const std::int32_t node : path_u_) flow_[node] += pred_up_[node] ? -theta : theta;
    for (const std::int32_t node : path_w_) flow_[node] += pred_up_[node] ? theta : -theta;

    // Cut at the leaving arc; the cut subtree contains u (or w), whichever
    // path hosts the leaving arc, and is re-rooted there.
    const std::int32_t sub_root = leave_on_u_side ? u : w;
    const std::int32_t new_parent = leave_on_u_side ? w : u;

    erase_child(parent_[leave], leave);
    std::int32_t node = sub_root;
    std::int32_t old_parent = parent_[node];
    std::int64_t carry_arc = pred_arc_[node];
    bool carry_up = pred_up_[node];
    std::int64_t carry_flow = flow_[node];
    parent_[node] = new_parent;
    pred_arc_[node] = entering_arc;
    pred_up_[node] = leave_on_u_side;  // u-side cut: arc points sub_root(u) -> w
    flow_[node] = theta;
    children_[new_parent].push_back(node);
    while (node != leave) {
      const std::int32_t next = old_parent;
      const std::int32_t next_old_parent = parent_[next];
      const std::int64_t next_arc = pred_arc_[next];
      const bool next_up = pred_up_[next];
      const std::int64_t next_flow = flow_[next];
      erase_child(next, node);
      parent_[next] = node;
      pred_arc_[next] = carry_arc;
      pred_up_[next] = !carry_up;
      flow_[next] = carry_flow;
      children_[node].push_back(next);
      old_parent = next_old_parent;
      carry_arc = next_arc;
      carry_up = next_up;
      carry_flow = next_flow;
      node = next;
    }

    refresh_subtree(sub_root);
  }

  void erase_child(std::int32_t parent, std::int32_t child) {
    auto& list = children_[parent];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i] == child) {
        list[i] = list.back();
        list.pop_back();
        return;
      }
    }
    throw std::logic_error("transport solver: broken tree adjacency");
  }

  void refresh_subtree(std::int32_t sub_root) {
    stack_.clear();
    stack_.push_back(sub_root);
    while (!stack_.empty()) {
      const std::int32_t v = stack_.back();
      stack_.pop_back();
      const std::int32_t par = parent_[v];
      depth_[v] = depth_[par] + 1;
      const double c = arc_cost(v);
      pi_[v] = pred_up_[v] ? c + pi_[par] : pi_[par] - c;
      for (const std::int32_t ch : children_[v]) stack_.push_back(ch);
    }
  }

  double arc_cost(std::int32_t node) const {
    const std::int64_t aid = pred_arc_[node];
    const std::int32_t src = pred_up_[node] ? node : parent_[node];
    return cost_(src, targets_[static_cast<std::size_t>(aid)]);
  }

  std::vector<std::int64_t> supplies_, demands_;
  std::vector<std::uint32_t> targets_;
  std::vector<std::size_t> offsets_;
  CostFn cost_;
  std::int32_t ns_ = 0, nt_ = 0, n_nodes_ = 0, root_ = 0;
  double eps_ = 0.0;

  std::vector<std::int32_t> parent_;
  std::vector<std::int64_t> pred_arc_;
  std::vector<char> pred_up_;
  std::vector<std::int32_t> depth_;
  std::vector<double> pi_;
  std::vector<std::int64_t> flow_;  // flow on the arc to the parent, in arc direction
  std::vector<std::vector<std::int32_t>> children_;
  std::vector<std::int32_t> path_u_, path_w_, stack_;
};

inline double pow_dist2(double d2, double p) {
  if (p == 2.0) return d2;
  if (p == 1.0) return std::sqrt(d2);
  return std::pow(d2, 0.5 * p);
}

inline double dist2(const HalfPlanePoint& a, const HalfPlanePoint& b) {
  const double dx = a.birth - b.birth;
  const double dy = a.death - b.death;
  return dx * dx + dy * dy;
}

/// Orders measures canonically so that ot_distance(mu, nu) and
/// ot_distance(nu, mu) run the identical computation.
inline bool canonical_before(const PersistenceMeasure& a, const PersistenceMeasure& b) {
  const auto& xa = a.atoms();
  const auto& xb = b.atoms();
  if (xa.size() != xb.size()) return xa.size() < xb.size();
  for (std::size_t i = 0; i < xa.size(); ++i) {
    if (xa[i].point.birth != xb[i].point.birth) return xa[i].point.birth < xb[i].point.birth;
    if (xa[i].point.death != xb[i].point.death) return xa[i].point.death < xb[i].point.death;
    if (xa[i].mass != xb[i].mass) return xa[i].mass < xb[i].mass;
  }
  return true;
}

}  // namespace detail

struct OtOptions {
  /// Masses are rounded to integer multiples of this precision so the
  /// balanced transportation problem is solved exactly.
  double mass_precision = 1e-9;
};

/// Exact optimal partial transport cost between persistence measures for
/// finite p >= 1. Mass may be created or destroyed at the diagonal at cost
/// persistence^p. Returns the distance (p-th root) and a witnessing plan.
inline OtResult ot_distance(const PersistenceMeasure& mu, const PersistenceMeasure& nu, double p,
                            const OtOptions& options = {}) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("ot_distance: p must be finite and >= 1");

  if (!detail::canonical_before(mu, nu)) {
    OtResult swapped = ot_distance(nu, mu, p, options);
    for (TransportPair& pair : swapped.plan.pairs) std::swap(pair.source, pair.target);
    return swapped;
  }

  OtResult result;
  result.plan.p = p;
  if (mu.empty() && nu.empty()) return result;

  // One side empty: everything goes to the diagonal.
  if (mu.empty() || nu.empty()) {
    const PersistenceMeasure& src = mu.empty() ? nu : mu;
    double cost = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Atom& a = src.atoms()[i];
      cost += a.mass * std::pow(persistence(a.point), p);
      TransportPair pair{static_cast<std::int32_t>(i), TransportPair::kDiagonal, a.mass};
      if (mu.empty()) std::swap(pair.source, pair.target);
      result.plan.pairs.push_back(pair);
    }
    result.plan.cost_p = cost;
    result.value = std::pow(cost, 1.0 / p);
    return result;
  }

  const double scale = 1.0 / options.mass_precision;
  std::vector<std::int64_t> supply, demand;
  std::vector<std::int32_t> src_index, dst_index;  // solver index -> atom index
  std::vector<HalfPlanePoint> xs, ys;
  std::vector<double> pers_p_a, pers_p_b;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const std::int64_t m = std::llround(mu.atoms()[i].mass * scale);
    if (m <= 0) continue;
    supply.push_back(m);
    src_index.push_back(static_cast<std::int32_t>(i));
    xs.push_back(mu.atoms()[i].point);
    pers_p_a.push_back(std::pow(persistence(mu.atoms()[i].point), p));
  }
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const std::int64_t m = std::llround(nu.atoms()[j].mass * scale);
    if (m <= 0) continue;
    demand.push_back(m);
    dst_index.push_back(static_cast<std::int32_t>(j));
    ys.push_back(nu.atoms()[j].point);
    pers_p_b.push_back(std::pow(persistence(nu.atoms()[j].point), p));
  }
  const std::int32_t na = static_cast<std::int32_t>(xs.size());
  const std::int32_t nb = static_cast<std::int32_t>(ys.size());
  std::int64_t total_a = 0, total_b = 0;
  for (const std::int64_t m : supply) total_a += m;
  for (const std::int64_t m : demand) total_b += m;

  // Diagonal depots: each side absorbs the other's total mass.
  supply.push_back(total_b);
  demand.push_back(total_a);

  // An atom-to-atom arc costing more than both diagonal detours can never be
  // used by an optimal plan, so it is not generated at all.
  std::vector<std::uint32_t> arc_targets;
  std::vector<std::size_t> arc_offsets(na + 2, 0);
  double max_cost = 0.0;
  for (std::int32_t i = 0; i < na; ++i) {
    for (std::int32_t j = 0; j < nb; ++j) {
      const double c = detail::pow_dist2(detail::dist2(xs[i], ys[j]), p);
      if (c <= pers_p_a[i] + pers_p_b[j]) {
        arc_targets.push_back(static_cast<std::uint32_t>(j));
        max_cost = std::max(max_cost, c);
      }
    }
    arc_targets.push_back(static_cast<std::uint32_t>(nb));  // diagonal depot
    max_cost = std::max(max_cost, pers_p_a[i]);
    arc_offsets[i + 1] = arc_targets.size();
  }
  for (std::int32_t j = 0; j <= nb; ++j) arc_targets.push_back(static_cast<std::uint32_t>(j));
  arc_offsets[na + 1] = arc_targets.size();
  for (const double ppb : pers_p_b) max_cost = std::max(max_cost, ppb);

  struct Cost {
    const HalfPlanePoint* xs;
    const HalfPlanePoint* ys;
    const double* ppa;
    const double* ppb;
    std::int32_t na, nb;
    double p;
    double operator()(std::int32_t i, std::uint32_t j) const {
      if (i == na) return j == static_cast<std::uint32_t>(nb) ? 0.0 : ppb[j];
      if (j == static_cast<std::uint32_t>(nb)) return ppa[i];
      return detail::pow_dist2(detail::dist2(xs[i], ys[j]), p);
    }
  };
  Cost cost{xs.data(), ys.data(), pers_p_a.data(), pers_p_b.data(), na, nb, p};

  detail::TransportSimplex<Cost> solver(std::move(supply), std::move(demand), std::move(arc_targets),
                                        std::move(arc_offsets), cost, max_cost);
  solver.solve();

  long double cost_total = 0.0L;
  solver.for_each_flow([&](std::int32_t s, std::int32_t t, std::int64_t f) {
    const double mass = static_cast<double>(f) / scale;
    const std::int32_t src = s < na ? src_index[s] : TransportPair::kDiagonal;
    const std::int32_t dst = t < nb ? dst_index[t] : TransportPair::kDiagonal;
    result.plan.pairs.push_back({src, dst, mass});
    cost_total += static_cast<long double>(mass) * cost(s, static_cast<std::uint32_t>(t));
  });
  result.plan.cost_p = static_cast<double>(cost_total);
  result.value = std::pow(result.plan.cost_p, 1.0 / p);
  return result;
}

namespace detail {

/// Maximum bipartite matching by augmenting paths. Adjacency is a callback
/// from a left vertex to the list of right vertices.
class BipartiteMatcher {
public:
  explicit BipartiteMatcher(std::size_t n_left, std::size_t n_right)
      : match_left_(n_left, -1), match_right_(n_right, -1) {}

  template <class Adjacency>
  std::size_t solve(const Adjacency& adjacency) {
    std::size_t matched = 0;
    std::vector<char> visited(match_right_.size());
    for (std::size_t u = 0; u < match_left_.size(); ++u) {
      std::fill(visited.begin(), visited.end(), 0);
      if (augment(u, adjacency, visited)) ++matched;
    }
    return matched;
  }

  const std::vector<std::int32_t>& left_match() const { return match_left_; }

private:
  template <class Adjacency>
  bool augment(std::size_t u, const Adjacency& adjacency, std::vector<char>& visited) {
    for (const std::int32_t v : adjacency(u)) {
      if (visited[v]) continue;
      visited[v] = 1;
      if (match_right_[v] < 0 || augment(static_cast<std::size_t>(match_right_[v]), adjacency, visited)) {
        match_left_[u] = v;
        match_right_[v] = static_cast<std::int32_t>(u);
        return true;
      }
    }
    return false;
  }

  std::vector<std::int32_t> match_left_;
  std::vector<std::int32_t> match_right_;
};

}  // namespace detail

/// Exact bottleneck distance between persistence diagrams (unit-multiple
/// masses required). Binary search over the candidate distances with a
/// perfect-matching feasibility test on the threshold graph; the diagonal is
/// always available at an atom's persistence.
inline OtResult bottleneck_distance(const PersistenceMeasure& mu, const PersistenceMeasure& nu) {
  if (!detail::canonical_before(mu, nu)) {
    OtResult swapped = bottleneck_distance(nu, mu);
    for (TransportPair& pair : swapped.plan.pairs) std::swap(pair.source, pair.target);
    return swapped;
  }

  auto expand = [](const PersistenceMeasure& m, std::vector<HalfPlanePoint>& pts, std::vector<std::int32_t>& owner) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Atom& a = m.atoms()[i];
      const std::int64_t copies = std::llround(a.mass);
      if (copies < 1 || std::abs(a.mass - static_cast<double>(copies)) > 1e-9)
        throw std::invalid_argument("bottleneck_distance: non-integer masses");
      for (std::int64_t c = 0; c < copies; ++c) {
        pts.push_back(a.point);
        owner.push_back(static_cast<std::int32_t>(i));
      }
    }
  };
  std::vector<HalfPlanePoint> xs, ys;
  std::vector<std::int32_t> owner_x, owner_y;
  expand(mu, xs, owner_x);
  expand(nu, ys, owner_y);
  const std::size_t n = xs.size(), m = ys.size();

  OtResult result;
  result.plan.p = std::numeric_limits<double>::infinity();
  if (n == 0 && m == 0) return result;

  std::vector<double> candidates;
  candidates.reserve(n * m + n + m);
  for (const auto& x : xs) candidates.push_back(persistence(x));
  for (const auto& y : ys) candidates.push_back(persistence(y));
  for (const auto& x : xs)
    for (const auto& y : ys) candidates.push_back(distance(x, y));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Left vertices: the n points of mu then m diagonal proxies of nu's points;
  // right vertices symmetrically. A point may pair with its own proxy once
  // its persistence is within threshold; proxy-proxy edges are free. A
  // perfect matching exists iff the bottleneck cost is <= t.
  auto adjacency_at = [&](double t) {
    return [&, t](std::size_t u) {
      std::vector<std::int32_t> out;
      if (u < n) {
        for (std::size_t j = 0; j < m; ++j)
          if (distance(xs[u], ys[j]) <= t) out.push_back(static_cast<std::int32_t>(j));
        if (persistence(xs[u]) <= t) out.push_back(static_cast<std::int32_t>(m + u));
      } else {
        const std::size_t j = u - n;
        if (persistence(ys[j]) <= t) out.push_back(static_cast<std::int32_t>(j));
        for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<std::int32_t>(m + i));
      }
      return out;
    };
  };
  auto feasible = [&](double t) {
    detail::BipartiteMatcher matcher(n + m, n + m);
    return matcher.solve(adjacency_at(t)) == n + m;
  };

  std::size_t lo = 0, hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(candidates[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  const double value = candidates[lo];

  detail::BipartiteMatcher matcher(n + m, n + m);
  matcher.solve(adjacency_at(value));
  for (std::size_t u = 0; u < n + m; ++u) {
    const std::int32_t v = matcher.left_match()[u];
    if (u < n) {
      result.plan.pairs.push_back({owner_x[u], v < static_cast<std::int32_t>(m) ? owner_y[v] : TransportPair::kDiagonal, 1.0});
    } else if (v >= 0 && v < static_cast<std::int32_t>(m)) {
      result.plan.pairs.push_back({TransportPair::kDiagonal, owner_y[v], 1.0});
    }
  }
  result.value = value;
  result.plan.cost_p = value;
  return result;
}

/// OT distance between two histograms on the same grid, computed on their
/// atomized cell centers.
inline double histogram_ot(const GridHistogram& a, const GridHistogram& b, double p, const OtOptions& options = {}) {
  if (!(a.spec() == b.spec())) throw DataError("histogram_ot: grid mismatch");
  return ot_distance(a.to_measure(), b.to_measure(), p, options).value;
}

// ---------------------------------------------------------------------------
// Multiscale upper bound on OT_p^p for measures supported in the box A_L
// (side L, sitting on the diagonal; an l1-ball in birth/death coordinates).
// ---------------------------------------------------------------------------

namespace detail {

inline int band_index(double height, double L) {
  // Band k covers heights in (L 2^{-(k+1)}, L 2^{-k}].
  height = std::min(height, L);
  int k = static_cast<int>(std::floor(std::log2(L / height)));
  k = std::max(k, 0);
  while (k > 0 && height > std::ldexp(L, -k)) --k;
  while (height <= std::ldexp(L, -(k + 1))) ++k;
  return k;
}

}  // namespace detail

/// Evaluates the dyadic-band transport bound: bands by distance to the
/// diagonal, each band refined J times into nested square partitions, summing
/// band-mass mismatches at every scale. Always >= ot_distance(mu, nu, p)^p.
inline double multiscale_upper_bound(const PersistenceMeasure& mu, const PersistenceMeasure& nu, double p, int J,
                                     double L) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("multiscale_upper_bound: p must be >= 1");
  if (J < 0) throw std::invalid_argument("multiscale_upper_bound: J must be >= 0");
  if (!(L > 0.0)) throw std::invalid_argument("multiscale_upper_bound: L must be positive");

  std::map<int, std::array<double, 2>> band_mass;
  std::map<std::array<std::int64_t, 4>, std::array<double, 2>> square_mass;  // (k, level, ia, ib)

  auto deposit = [&](const PersistenceMeasure& measure, int side) {
    for (const Atom& atom : measure.atoms()) {
      const DiagonalCoords c = to_diagonal_coords(atom.point);
      if (std::abs(c.along) > L / 2 + 1e-9 || c.height > L + 1e-9)
        throw std::invalid_argument("multiscale_upper_bound: support outside A_L");
      const int k = detail::band_index(c.height, L);
      if (k + 1 + J > 60) throw std::invalid_argument("multiscale_upper_bound: atom too close to the diagonal");
      band_mass[k][side] += atom.mass;
      const double band_bottom = std::ldexp(L, -(k + 1));
      for (int level = 0; level < J; ++level) {
        const double side_len = std::ldexp(L, -(k + 1 + level));
        const std::int64_t n_along = std::int64_t{1} << (k + 1 + level);
        const std::int64_t n_height = std::int64_t{1} << level;
        std::int64_t ia = static_cast<std::int64_t>(std::floor((c.along + L / 2) / side_len));
        std::int64_t ib = static_cast<std::int64_t>(std::floor((c.height - band_bottom) / side_len));
        ia = std::clamp<std::int64_t>(ia, 0, n_along - 1);
        ib = std::clamp<std::int64_t>(ib, 0, n_height - 1);
        square_mass[{k, level, ia, ib}][side] += atom.mass;
      }
    }
  };
  deposit(mu, 0);
  deposit(nu, 1);

  std::map<int, double> square_terms;  // per band: sum over levels of 2^{-jp} |diff|
  for (const auto& [key, masses] : square_mass) {
    const int k = static_cast<int>(key[0]);
    const int level = static_cast<int>(key[1]);
    square_terms[k] += std::pow(2.0, -(level + 1) * p) * std::abs(masses[0] - masses[1]);
  }

  const double c_p = std::pow(2.0, -p / 2) * (1.0 + 1.0 / (std::pow(2.0, p) - 1.0));
  double sum = 0.0;
  for (const auto& [k, masses] : band_mass) {
    double term = std::pow(2.0, -J * p) * std::min(masses[0], masses[1]);
    term += c_p * std::abs(masses[0] - masses[1]);
    if (const auto it = square_terms.find(k); it != square_terms.end()) term += it->second;
    sum += std::pow(2.0, -k * p) * term;
  }
  return std::pow(2.0, p / 2) * std::pow(L, p) * sum;
}

}  // namespace epdq

#endif  // EPDQ_TRANSPORT_HPP
