#ifndef EPDQ_ENCLOSING_CIRCLE_HPP
#define EPDQ_ENCLOSING_CIRCLE_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "epdq/rng.hpp"

namespace epdq {

struct Circle {
  double cx = 0.0, cy = 0.0;
  double r2 = -1.0;  // squared radius; negative: no circle
};

inline bool circle_contains(const Circle& c, double x, double y) {
  if (c.r2 < 0.0) return false;
  const double dx = x - c.cx, dy = y - c.cy;
  return dx * dx + dy * dy <= c.r2 * (1.0 + 1e-12) + 1e-30;
}

namespace detail {

inline Circle circle_from_two(double x1, double y1, double x2, double y2) {
  const double cx = (x1 + x2) / 2, cy = (y1 + y2) / 2;
  const double dx = x1 - cx, dy = y1 - cy;
  return {cx, cy, dx * dx + dy * dy};
}

/// Circumcircle; falls back to the widest diametral circle for (near-)
/// collinear triples.
inline Circle circle_from_three(double x1, double y1, double x2, double y2, double x3, double y3) {
  const double ax = x2 - x1, ay = y2 - y1;
  const double bx = x3 - x1, by = y3 - y1;
  const double det = 2.0 * (ax * by - ay * bx);
  const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by;
  const double scale = std::max({a2, b2, 1e-300});
  if (std::abs(det) <= 1e-14 * scale) {
    Circle best = circle_from_two(x1, y1, x2, y2);
    const Circle c13 = circle_from_two(x1, y1, x3, y3);
    if (c13.r2 > best.r2) best = c13;
    const Circle c23 = circle_from_two(x2, y2, x3, y3);
    if (c23.r2 > best.r2) best = c23;
    return best;
  }
  const double ux = (by * a2 - ay * b2) / det;
  const double uy = (ax * b2 - bx * a2) / det;
  return {x1 + ux, y1 + uy, ux * ux + uy * uy};
}

}  // namespace detail

/// Smallest circle enclosing a planar point set, by the randomized
/// incremental method (expected linear time). The shuffle uses a fixed
/// internal seed, so results are deterministic.
inline Circle minimal_enclosing_circle(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("minimal_enclosing_circle: size mismatch");
  const std::size_t n = xs.size();
  if (n == 0) throw std::invalid_argument("minimal_enclosing_circle: empty point set");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(0x9e3779b97f4a7c15ULL);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

  auto px = [&](std::size_t i) { return xs[order[i]]; };
  auto py = [&](std::size_t i) { return ys[order[i]]; };

  Circle c{px(0), py(0), 0.0};
  for (std::size_t i = 1; i < n; ++i) {
    if (circle_contains(c, px(i), py(i))) continue;
    c = {px(i), py(i), 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (circle_contains(c, px(j), py(j))) continue;
      c = detail::circle_from_two(px(i), py(i), px(j), py(j));
      for (std::size_t k = 0; k < j; ++k) {
        if (circle_contains(c, px(k), py(k))) continue;
        c = detail::circle_from_three(px(i), py(i), px(j), py(j), px(k), py(k));
      }
    }
  }
  return c;
}

}  // namespace epdq

#endif  // EPDQ_ENCLOSING_CIRCLE_HPP
