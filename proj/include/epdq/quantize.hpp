#ifndef EPDQ_QUANTIZE_HPP
#define EPDQ_QUANTIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "epdq/enclosing_circle.hpp"
#include "epdq/log.hpp"
#include "epdq/measures.hpp"
#include "epdq/rng.hpp"
#include "epdq/transport.hpp"

namespace epdq {

/// Ordered list of k centroids, all strictly above the diagonal. The order
/// breaks assignment ties; the diagonal acts as an implicit extra centroid
/// with index k (see assign_cell).
struct Codebook {
  std::vector<HalfPlanePoint> centroids;

  Codebook() = default;
  explicit Codebook(std::vector<HalfPlanePoint> c) : centroids(std::move(c)) {
    for (const auto& p : centroids)
      if (!above_diagonal(p)) throw std::invalid_argument("Codebook: centroid not above the diagonal");
  }

  std::size_t k() const { return centroids.size(); }
};

/// Moves a point to persistence at least min_persistence, keeping its
/// diagonal projection.
inline HalfPlanePoint clamp_above_diagonal(HalfPlanePoint x, double min_persistence = 1e-9) {
  if (persistence(x) >= min_persistence) return x;
  const double mid = (x.birth + x.death) / 2;
  const double off = min_persistence / kSqrt2;
  return {mid - off, mid + off};
}

/// Cell index of x: the smallest index attaining the minimal distance, where
/// index k() means the diagonal cell (distance = persistence, losing ties to
/// every centroid).
inline std::size_t assign_cell(const Codebook& c, const HalfPlanePoint& x, bool use_diagonal = true) {
  std::size_t best = c.k();
  double best_d = use_diagonal ? persistence(x) : std::numeric_limits<double>::infinity();
  for (std::size_t j = c.k(); j-- > 0;) {
    const double d = distance(c.centroids[j], x);
    if (d <= best_d) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

/// The mass each centroid's cell captures from mu (the diagonal cell is not
/// reported; its mass is the remainder).
inline std::vector<double> optimal_weights(const Codebook& c, const PersistenceMeasure& mu, bool use_diagonal = true) {
  std::vector<double> weights(c.k(), 0.0);
  for (const Atom& a : mu.atoms()) {
    const std::size_t j = assign_cell(c, a.point, use_diagonal);
    if (j < c.k()) weights[j] += a.mass;
  }
  return weights;
}

/// Quantization error of mu against the codebook: the p-integrated (or, for
/// p = inf, maximal) distance from each atom to its nearest centroid, the
/// diagonal included.
inline double distortion(const Codebook& c, const PersistenceMeasure& mu, double p, bool use_diagonal = true) {
  if (!(p >= 1.0)) throw std::invalid_argument("distortion: p must be >= 1 or inf");
  auto nearest = [&](const HalfPlanePoint& x) {
    double best = use_diagonal ? persistence(x) : std::numeric_limits<double>::infinity();
    for (const auto& cj : c.centroids) best = std::min(best, distance(cj, x));
    return best;
  };
  if (std::isinf(p)) {
    double worst = 0.0;
    for (const Atom& a : mu.atoms()) worst = std::max(worst, nearest(a.point));
    return worst;
  }
  double sum = 0.0;
  for (const Atom& a : mu.atoms()) sum += a.mass * std::pow(nearest(a.point), p);
  return std::pow(sum, 1.0 / p);
}

// ---------------------------------------------------------------------------
// p-centers
// ---------------------------------------------------------------------------

namespace detail {

inline HalfPlanePoint weighted_mean(const std::vector<Atom>& cell) {
  double wx = 0.0, wy = 0.0, w = 0.0;
  for (const Atom& a : cell) {
    wx += a.mass * a.point.birth;
    wy += a.mass * a.point.death;
    w += a.mass;
  }
  return {wx / w, wy / w};
}

inline double center_objective(const std::vector<Atom>& cell, const HalfPlanePoint& y, double p) {
  double f = 0.0;
  for (const Atom& a : cell) f += a.mass * std::pow(distance(a.point, y), p);
  return f;
}

// Gradient of sum m d^p; returns false at a non-smooth atom hit (p < 2).
inline bool center_gradient(const std::vector<Atom>& cell, const HalfPlanePoint& y, double p, double& gx, double& gy) {
  gx = gy = 0.0;
  for (const Atom& a : cell) {
    const double d = distance(a.point, y);
    if (d < 1e-300) {
      if (p < 2.0) return false;
      continue;
    }
    const double w = a.mass * p * std::pow(d, p - 2.0);
    gx += w * (y.birth - a.point.birth);
    gy += w * (y.death - a.point.death);
  }
  return true;
}

/// Scaled gradient norm matching the p-th-rooted objective, used as the
/// stopping criterion.
inline double rooted_gradient_norm(double f, double gx, double gy, double p) {
  if (f <= 0.0) return 0.0;
  return std::hypot(gx, gy) / p * std::pow(f, 1.0 / p - 1.0);
}

inline HalfPlanePoint p_center_irls(const std::vector<Atom>& cell, double p) {
  HalfPlanePoint y = weighted_mean(cell);
  for (int iter = 0; iter < 20000; ++iter) {
    double gx, gy;
    if (!center_gradient(cell, y, p, gx, gy)) break;  // sitting on an atom
    if (rooted_gradient_norm(center_objective(cell, y, p), gx, gy, p) <= 1e-9) break;
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (const Atom& a : cell) {
      const double d = std::max(distance(a.point, y), 1e-14);
      const double w = a.mass * std::pow(d, p - 2.0);
      sw += w;
      sx += w * a.point.birth;
      sy += w * a.point.death;
    }
    const HalfPlanePoint next{sx / sw, sy / sw};
    if (distance(next, y) <= 1e-15) {
      y = next;
      break;
    }
    y = next;
  }
  return y;
}

inline HalfPlanePoint p_center_descent(const std::vector<Atom>& cell, double p) {
  HalfPlanePoint y = weighted_mean(cell);
  double f = center_objective(cell, y, p);
  for (int iter = 0; iter < 5000; ++iter) {
    double gx, gy;
    center_gradient(cell, y, p, gx, gy);
    if (rooted_gradient_norm(f, gx, gy, p) <= 1e-9) break;
    const double g2 = gx * gx + gy * gy;
    // Curvature-scaled initial step, then Armijo halving.
    double curvature = 0.0;
    for (const Atom& a : cell) curvature += a.mass * p * (p - 1.0) * std::pow(distance(a.point, y) + 1e-300, p - 2.0);
    double step = 1.0 / std::max(curvature, 1e-300);
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt) {
      const HalfPlanePoint trial{y.birth - step * gx, y.death - step * gy};
      const double ft = center_objective(cell, trial, p);
      if (ft <= f - 0.5 * step * g2) {
        y = trial;
        f = ft;
        moved = true;
        break;
      }
      step /= 2;
    }
    if (!moved) break;
  }
  return y;
}

}  // namespace detail

/// Minimizer of the p-integrated distance over one cell's weighted points:
/// the weighted mean for p = 2, the smallest-enclosing-circle center for
/// p = inf, otherwise a first-order solve to gradient norm 1e-9.
inline HalfPlanePoint p_center(const std::vector<Atom>& cell, double p) {
  if (cell.empty()) throw std::invalid_argument("p_center: empty cell");
  if (!(p >= 1.0)) throw std::invalid_argument("p_center: p must be >= 1 or inf");
  if (cell.size() == 1) return cell.front().point;
  if (std::isinf(p)) {
    std::vector<double> xs, ys;
    xs.reserve(cell.size());
    ys.reserve(cell.size());
    for (const Atom& a : cell) {
      xs.push_back(a.point.birth);
      ys.push_back(a.point.death);
    }
    const Circle circle = minimal_enclosing_circle(xs, ys);
    return {circle.cx, circle.cy};
  }
  if (p == 2.0) return detail::weighted_mean(cell);
  if (p < 2.0) return detail::p_center_irls(cell, p);
  return detail::p_center_descent(cell, p);
}

// ---------------------------------------------------------------------------
// Online quantization
// ---------------------------------------------------------------------------

/// One stochastic step: each centroid with mass in both half-batches moves
/// toward the p-center of its cell in the first half, scaled by the mass
/// ratio of the halves and the step size 1/(t+1). Cells empty in either half
/// keep their centroid. Centroids are clamped back above the diagonal.
inline Codebook update_step(int t, const Codebook& c, const PersistenceMeasure& mu_half1,
                            const PersistenceMeasure& mu_half2, double p, bool use_diagonal = true) {
  if (t < 0) throw std::invalid_argument("update_step: t must be >= 0");
  const std::size_t k = c.k();
  std::vector<std::vector<Atom>> cell_atoms(k);
  std::vector<double> mass1(k, 0.0), mass2(k, 0.0);
  for (const Atom& a : mu_half1.atoms()) {
    const std::size_t j = assign_cell(c, a.point, use_diagonal);
    if (j < k) {
      cell_atoms[j].push_back(a);
      mass1[j] += a.mass;
    }
  }
  for (const Atom& a : mu_half2.atoms()) {
    const std::size_t j = assign_cell(c, a.point, use_diagonal);
    if (j < k) mass2[j] += a.mass;
  }
  std::vector<HalfPlanePoint> next = c.centroids;
  const double step = 1.0 / (t + 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (mass1[j] <= 0.0 || mass2[j] <= 0.0) continue;
    const HalfPlanePoint v = p_center(cell_atoms[j], p);
    const double ratio = mass1[j] / mass2[j];
    HalfPlanePoint moved{next[j].birth - step * ratio * (next[j].birth - v.birth),
                         next[j].death - step * ratio * (next[j].death - v.death)};
    next[j] = clamp_above_diagonal(moved);
  }
  return Codebook(std::move(next));
}

/// The k highest-persistence points of a diagram (ties broken by
/// coordinates), the default initialization.
inline Codebook top_persistence_init(const PersistenceMeasure& diagram, int k) {
  if (k < 1) throw std::invalid_argument("top_persistence_init: k must be >= 1");
  if (diagram.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("top_persistence_init: k larger than available init points");
  std::vector<HalfPlanePoint> pts;
  pts.reserve(diagram.size());
  for (const Atom& a : diagram.atoms()) pts.push_back(a.point);
  std::sort(pts.begin(), pts.end(), [](const HalfPlanePoint& a, const HalfPlanePoint& b) {
    const double pa = persistence(a), pb = persistence(b);
    if (pa != pb) return pa > pb;
    if (a.birth != b.birth) return a.birth < b.birth;
    return a.death < b.death;
  });
  pts.resize(static_cast<std::size_t>(k));
  return Codebook(std::move(pts));
}

namespace detail {

inline PersistenceMeasure scaled_batch(const std::vector<PersistenceMeasure>& diagrams, std::size_t begin,
                                       std::size_t end, double factor) {
  std::vector<Atom> atoms;
  for (std::size_t i = begin; i < end; ++i)
    for (const Atom& a : diagrams[i].atoms()) atoms.push_back({a.point, a.mass * factor});
  return PersistenceMeasure(std::move(atoms));
}

inline Codebook online_quantize_impl(const std::vector<PersistenceMeasure>& diagrams, int k, double p, int batch_size,
                                     std::optional<Codebook> init, bool split_batches, bool use_diagonal) {
  if (diagrams.empty()) throw std::invalid_argument("online quantization: empty input");
  if (batch_size < 1 || diagrams.size() < static_cast<std::size_t>(batch_size))
    throw std::invalid_argument("online quantization: need n >= batch_size >= 1");
  Codebook c = init ? *init : top_persistence_init(diagrams[0], k);
  if (c.k() != static_cast<std::size_t>(k)) throw std::invalid_argument("online quantization: init size != k");

  const std::size_t batches = diagrams.size() / static_cast<std::size_t>(batch_size);
  for (std::size_t t = 0; t < batches; ++t) {
    const std::size_t begin = t * batch_size;
    const std::size_t end = begin + batch_size;
    if (split_batches) {
      const std::size_t mid = begin + static_cast<std::size_t>(batch_size) / 2;
      const double factor = 2.0 / batch_size;
      const PersistenceMeasure m1 = scaled_batch(diagrams, begin, mid, factor);
      const PersistenceMeasure m2 = scaled_batch(diagrams, mid, end, factor);
      c = update_step(static_cast<int>(t), c, m1, m2, p, use_diagonal);
    } else {
      const PersistenceMeasure m = scaled_batch(diagrams, begin, end, 1.0 / batch_size);
      c = update_step(static_cast<int>(t), c, m, m, p, use_diagonal);
    }
  }
  return c;
}

}  // namespace detail

/// Streams the diagram sequence through batched stochastic updates with the
/// diagonal cell absorbing low-persistence mass. p may be inf.
inline Codebook online_quantize(const std::vector<PersistenceMeasure>& diagrams, int k, double p, int batch_size,
                                std::optional<Codebook> init = std::nullopt, bool split_batches = false) {
  return detail::online_quantize_impl(diagrams, k, p, batch_size, std::move(init), split_batches, true);
}

/// The same algorithm with the diagonal cell disabled: plain stochastic
/// k-means on diagram points (the W_2 baseline).
inline Codebook lloyd_no_diagonal(const std::vector<PersistenceMeasure>& diagrams, int k, double p = 2.0,
                                  int batch_size = 1, std::optional<Codebook> init = std::nullopt,
                                  bool split_batches = false) {
  return detail::online_quantize_impl(diagrams, k, p, batch_size, std::move(init), split_batches, false);
}

// ---------------------------------------------------------------------------
// Weighted-codebook baseline: subsample the pooled diagram by a
// persistence-driven weight function, then batch Lloyd k-means.
// ---------------------------------------------------------------------------

struct WeightedCodebookOptions {
  int n_subsample = 10000;
  double q = 1.0;
  double quantile_lo = 0.05;
  double quantile_hi = 0.95;
};

namespace detail {

inline double interpolated_quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double pos = prob * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace detail

inline Codebook weighted_codebook(const std::vector<PersistenceMeasure>& diagrams, int k,
                                  const WeightedCodebookOptions& opts, std::uint64_t seed,
                                  std::optional<Codebook> init = std::nullopt) {
  const PersistenceMeasure epd = empirical_epd(diagrams);
  if (epd.empty()) throw std::invalid_argument("weighted_codebook: empty support");
  if (opts.n_subsample < 1) throw std::invalid_argument("weighted_codebook: n_subsample must be >= 1");

  std::vector<double> pers_q;
  pers_q.reserve(epd.size());
  for (const Atom& a : epd.atoms()) pers_q.push_back(std::pow(persistence(a.point), opts.q));
  const double lambda = detail::interpolated_quantile(pers_q, opts.quantile_lo);
  const double theta = detail::interpolated_quantile(pers_q, opts.quantile_hi);

  std::vector<double> cumulative(epd.size());
  double total = 0.0;
  const bool degenerate = !(theta - lambda > 0.0);
  for (std::size_t i = 0; i < epd.size(); ++i) {
    const double w = degenerate ? 1.0 : std::clamp((pers_q[i] - lambda) / (theta - lambda), 0.0, 1.0);
    total += epd.atoms()[i].mass * w;
    cumulative[i] = total;
  }
  if (degenerate || total <= 0.0) {
    log(LogLevel::warn, "weighted_codebook: degenerate weights, falling back to uniform subsampling");
    total = 0.0;
    for (std::size_t i = 0; i < epd.size(); ++i) {
      total += epd.atoms()[i].mass;
      cumulative[i] = total;
    }
  }

  Rng rng(seed);
  std::vector<HalfPlanePoint> sample;
  sample.reserve(static_cast<std::size_t>(opts.n_subsample));
  for (int s = 0; s < opts.n_subsample; ++s) {
    const double u = rng.uniform01() * total;
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    sample.push_back(epd.atoms()[std::min(idx, epd.size() - 1)].point);
  }

  Codebook c = init ? *init : top_persistence_init(diagrams[0], k);
  if (c.k() != static_cast<std::size_t>(k)) throw std::invalid_argument("weighted_codebook: init size != k");

  // Plain Lloyd iterations until the distortion stalls.
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> sx(c.k(), 0.0), sy(c.k(), 0.0);
    std::vector<std::size_t> count(c.k(), 0);
    double cost = 0.0;
    for (const HalfPlanePoint& pt : sample) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < c.k(); ++j) {
        const double d = distance(c.centroids[j], pt);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      sx[best] += pt.birth;
      sy[best] += pt.death;
      ++count[best];
      cost += best_d * best_d;
    }
    for (std::size_t j = 0; j < c.k(); ++j)
      if (count[j] > 0)
        c.centroids[j] = clamp_above_diagonal({sx[j] / count[j], sy[j] / count[j]});
    if (prev - cost <= 1e-7 * std::max(prev, 1e-300)) break;
    prev = cost;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Margin diagnostic
// ---------------------------------------------------------------------------

namespace detail {

/// Real roots of u^3 + p u + q = 0.
inline int cubic_roots(double p, double q, double roots[3]) {
  const double half_q = q / 2.0;
  const double third_p = p / 3.0;
  const double disc = half_q * half_q + third_p * third_p * third_p;
  int count = 0;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    roots[count++] = std::cbrt(-half_q + s) + std::cbrt(-half_q - s);
  } else if (p == 0.0 && q == 0.0) {
    roots[count++] = 0.0;
  } else {
    const double m = 2.0 * std::sqrt(-third_p);
    const double phi = std::acos(std::clamp(3.0 * q / (p * m), -1.0, 1.0)) / 3.0;
    for (int i = 0; i < 3; ++i) roots[count++] = m * std::cos(phi - 2.0 * 3.14159265358979323846 * i / 3.0);
  }
  // One Newton polish per root.
  for (int i = 0; i < count; ++i) {
    const double u = roots[i];
    const double f = u * u * u + p * u + q;
    const double df = 3.0 * u * u + p;
    if (std::abs(df) > 1e-300) roots[i] = u - f / df;
  }
  return count;
}

/// Distance from a point to the parabola of points equidistant from a focus
/// and the diagonal, both expressed in diagonal coordinates.
inline double distance_to_parabola(const DiagonalCoords& q, const DiagonalCoords& focus) {
  const double fb = focus.height;  // > 0 for a valid centroid
  auto parabola_height = [&](double t) {
    const double u = t - focus.along;
    return u * u / (2.0 * fb) + fb / 2.0;
  };
  // Critical points of the squared distance along the parametrization.
  const double cubic_p = fb * (3.0 * fb - 2.0 * q.height);
  const double cubic_q = 2.0 * fb * fb * (focus.along - q.along);
  double roots[3];
  const int count = cubic_roots(cubic_p, cubic_q, roots);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double t = roots[i] + focus.along;
    const double dh = parabola_height(t) - q.height;
    const double da = t - q.along;
    best = std::min(best, std::sqrt(da * da + dh * dh));
  }
  return best;
}

/// Distance from x to the cell-boundary pieces of the codebook: the
/// perpendicular bisector of every centroid pair and the focus/diagonal
/// parabola of every centroid.
inline double distance_to_cell_boundaries(const Codebook& c, const HalfPlanePoint& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.k(); ++j) {
    for (std::size_t l = j + 1; l < c.k(); ++l) {
      const double dj = distance(c.centroids[j], x);
      const double dl = distance(c.centroids[l], x);
      const double sep = distance(c.centroids[j], c.centroids[l]);
      if (sep > 0.0) best = std::min(best, std::abs(dj * dj - dl * dl) / (2.0 * sep));
    }
    best = std::min(best, distance_to_parabola(to_diagonal_coords(x), to_diagonal_coords(c.centroids[j])));
  }
  return best;
}

}  // namespace detail

/// For each radius t, the mass of the measure within distance t of the cell
/// boundary set. A flat profile near t = 0 indicates well-separated cells.
inline std::vector<std::pair<double, double>> margin_profile(const PersistenceMeasure& epd, const Codebook& c,
                                                             const std::vector<double>& radii) {
  std::vector<double> dist;
  dist.reserve(epd.size());
  for (const Atom& a : epd.atoms()) dist.push_back(detail::distance_to_cell_boundaries(c, a.point));
  std::vector<std::pair<double, double>> profile;
  profile.reserve(radii.size());
  for (const double t : radii) {
    double mass = 0.0;
    for (std::size_t i = 0; i < epd.size(); ++i)
      if (dist[i] <= t) mass += epd.atoms()[i].mass;
    profile.push_back({t, mass});
  }
  return profile;
}

}  // namespace epdq

#endif  // EPDQ_QUANTIZE_HPP
