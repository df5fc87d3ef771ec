#ifndef EPDQ_GENERATORS_HPP
#define EPDQ_GENERATORS_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "epdq/homology.hpp"
#include "epdq/measures.hpp"
#include "epdq/rng.hpp"

namespace epdq {

// ---------------------------------------------------------------------------
// Triangle-complex model: a random number of disjoint triangles, each edge
// carrying an independent U[0,1] level and each interior the edge maximum
// plus an independent Beta(1,3) increment. Every triangle contributes one
// loop born at its last edge level b and dying at b + V, so the diagram can
// be emitted directly.
// ---------------------------------------------------------------------------

struct TriangleModelParams {
  int n_min = 1;
  int n_max = 20;

  void validate() const {
    if (n_min < 0 || n_max < n_min) throw std::invalid_argument("TriangleModelParams: need 0 <= n_min <= n_max");
  }
};

inline PersistenceMeasure sample_triangle_diagram(const TriangleModelParams& params, Rng& rng) {
  params.validate();
  const std::int64_t count = rng.uniform_int(params.n_min, params.n_max);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const double birth = std::max({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    double lifetime = rng.beta_1_3();
    while (lifetime <= 0.0) lifetime = rng.beta_1_3();  // measure-zero draw
    atoms.push_back({{birth, birth + lifetime}, 1.0});
  }
  return PersistenceMeasure(std::move(atoms));
}

namespace detail {

/// Beta(1,3) CDF clamped to [0,1]: F(v) = 1 - (1-v)^3.
inline double beta_1_3_cdf(double v) {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  const double w = 1.0 - v;
  return 1.0 - w * w * w;
}

template <class Fn>
double adaptive_simpson(const Fn& fn, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = (a + b) / 2;
  const double lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = fn(lm), frm = fn(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return adaptive_simpson(fn, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson(fn, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

template <class Fn>
double integrate(const Fn& fn, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = (a + b) / 2;
  const double fa = fn(a), fm = fn(m), fb = fn(b);
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return adaptive_simpson(fn, a, b, fa, fm, fb, whole, tol, 48);
}

/// Mean number of triangle-model points (per unit of the constant-30
/// convention, i.e. for a mean count of 10 triangles) falling in the box
/// [t_lo, t_hi] x [s_lo, s_hi] intersected with the half-plane. Valid for any
/// box; the clamped CDF handles parts at or below the diagonal.
inline double epd_box_mass(double t_lo, double t_hi, double s_lo, double s_hi, double tol = 1e-8) {
  if (!(t_hi > t_lo) || !(s_hi > s_lo)) return 0.0;
  t_lo = std::clamp(t_lo, 0.0, 1.0);
  t_hi = std::clamp(t_hi, 0.0, 1.0);
  if (!(t_hi > t_lo)) return 0.0;
  auto integrand = [&](double t) { return 30.0 * t * t * (beta_1_3_cdf(s_hi - t) - beta_1_3_cdf(s_lo - t)); };
  // The CDF has kinks where s_lo - t or s_hi - t crosses 0 or 1; split there.
  std::vector<double> cuts{t_lo, t_hi, s_lo, s_lo - 1.0, s_hi, s_hi - 1.0};
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::clamp(cuts[i], t_lo, t_hi);
    const double b = std::clamp(cuts[i + 1], t_lo, t_hi);
    total += integrate(integrand, a, b, tol);
  }
  return total;
}

}  // namespace detail

/// Expected mass of the triangle-model diagram distribution on the rectangle
/// [r1, r2] x [s1, s2] intersected with the half-plane (mean triangle count
/// 10), by adaptive quadrature of the closed form.
inline double closed_form_epd_rect(double r1, double r2, double s1, double s2) {
  if (!(r1 <= r2) || !(s1 <= s2)) throw std::invalid_argument("closed_form_epd_rect: need r1 <= r2 and s1 <= s2");
  return detail::epd_box_mass(r1, r2, s1, s2);
}

/// The closed-form triangle-model measure binned on a grid: each cell holds
/// the mass of its intersection with the open half-plane. Cells whose center
/// is not above the diagonal hand their (boundary sliver) mass to the next
/// cell up, per the histogram convention.
inline GridHistogram closed_form_epd_histogram(const GridSpec& spec) {
  GridHistogram hist(spec);
  for (int ix = 0; ix < spec.nx; ++ix) {
    const double t_lo = spec.x_lo + ix * spec.cell_width();
    const double t_hi = t_lo + spec.cell_width();
    for (int iy = 0; iy < spec.ny; ++iy) {
      const double s_lo = spec.y_lo + iy * spec.cell_height();
      const double s_hi = s_lo + spec.cell_height();
      if (s_hi <= t_lo) continue;  // entirely at or below the diagonal
      const double mass = detail::epd_box_mass(t_lo, t_hi, s_lo, s_hi);
      if (mass > 0.0) hist.add_mass(ix, iy, mass);
    }
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Torus point clouds.
// ---------------------------------------------------------------------------

struct TorusParams {
  double mean_points = 2000.0;  // Poisson rate for the cloud size
  double r1 = 5.0;              // center-of-tube radius
  double r2 = 2.0;              // tube radius
  double epsilon = 0.0;         // radii jitter: R ~ U[r - eps, r + eps]

  void validate() const {
    if (!(mean_points > 0.0)) throw std::invalid_argument("TorusParams: mean_points must be positive");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("TorusParams: epsilon must be >= 0");
    if (!(r1 - epsilon > r2 + epsilon) || !(r2 - epsilon > 0.0))
      throw std::invalid_argument("TorusParams: need r1 - eps > r2 + eps > 0");
  }
};

/// Uniform (surface-area) points on the torus with the given radii. The tube
/// angle is drawn by rejection against the area density 1 + (r2/r1) cos.
inline std::vector<Point3> sample_torus_points(std::size_t count, double big_radius, double tube_radius, Rng& rng) {
  std::vector<Point3> points;
  points.reserve(count);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = two_pi * rng.uniform01();
    double theta;
    do {
      theta = two_pi * rng.uniform01();
    } while (rng.uniform01() * (big_radius + tube_radius) > big_radius + tube_radius * std::cos(theta));
    const double ring = big_radius + tube_radius * std::cos(theta);
    points.push_back({ring * std::cos(phi), ring * std::sin(phi), tube_radius * std::sin(theta)});
  }
  return points;
}

/// One random cloud: Poisson-sized, radii jittered uniformly within epsilon.
inline std::vector<Point3> sample_torus_cloud(const TorusParams& params, Rng& rng) {
  params.validate();
  const std::int64_t count = rng.poisson(params.mean_points);
  const double big_radius = rng.uniform(params.r1 - params.epsilon, params.r1 + params.epsilon);
  const double tube_radius = rng.uniform(params.r2 - params.epsilon, params.r2 + params.epsilon);
  return sample_torus_points(static_cast<std::size_t>(count), big_radius, tube_radius, rng);
}

}  // namespace epdq

#endif  // EPDQ_GENERATORS_HPP
