#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "epdq/quantize.hpp"
#include "epdq/rng.hpp"
#include "oracles.hpp"

using namespace epdq;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

PersistenceMeasure random_measure(Rng& rng, int min_atoms, int max_atoms, double spread = 1.0) {
  std::vector<Atom> atoms;
  const int n = static_cast<int>(rng.uniform_int(min_atoms, max_atoms));
  for (int i = 0; i < n; ++i) {
    const double birth = rng.uniform(0.0, spread);
    atoms.push_back({{birth, birth + rng.uniform(1e-3, spread)}, rng.uniform(0.1, 1.5)});
  }
  return PersistenceMeasure(std::move(atoms));
}

Codebook random_codebook(Rng& rng, int k, double spread = 1.0) {
  std::vector<HalfPlanePoint> pts;
  for (int j = 0; j < k; ++j) {
    const double birth = rng.uniform(0.0, spread);
    pts.push_back({birth, birth + rng.uniform(0.05, spread)});
  }
  return Codebook(std::move(pts));
}

PersistenceMeasure quantized_measure(const Codebook& c, const std::vector<double>& weights) {
  std::vector<Atom> atoms;
  for (std::size_t j = 0; j < c.k(); ++j) atoms.push_back({c.centroids[j], weights[j]});
  return PersistenceMeasure(std::move(atoms));
}

}  // namespace

TEST_CASE("assign_cell follows the distance rule with index tie-breaks") {
  const Codebook c({{0.0, 2.0}});
  CHECK(assign_cell(c, {0.0, 1.9}) == 0);
  CHECK(assign_cell(c, {0.9, 1.0}) == 1);  // diagonal cell

  // Equidistant to both centroids: the earlier one wins.
  const Codebook two({{0.0, 2.0}, {0.0, 4.0}});
  CHECK(assign_cell(two, {0.0, 3.0}) == 0);
  CHECK(assign_cell(two, {0.0, 2.0}) == 0);
}

TEST_CASE("assign_cell partitions every atom exactly once") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Codebook c = random_codebook(rng, 1 + static_cast<int>(rng.uniform_int(0, 3)));
    const PersistenceMeasure mu = random_measure(rng, 0, 10);
    double assigned = 0.0;
    const std::vector<double> w = optimal_weights(c, mu);
    for (const double wj : w) assigned += wj;
    double diag = 0.0;
    for (const Atom& a : mu.atoms())
      if (assign_cell(c, a.point) == c.k()) diag += a.mass;
    CHECK(assigned + diag == Catch::Approx(mu.total_mass()).margin(1e-12));
  }
}

TEST_CASE("optimal_weights on hand-built cases") {
  const Codebook c({{0.0, 2.0}, {0.0, 4.0}});
  const PersistenceMeasure mu({{{0.0, 2.0}, 1.0}, {{0.0, 4.0}, 1.0}});
  const std::vector<double> w = optimal_weights(c, mu);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);

  // All atoms hugging the diagonal: every centroid cell is empty.
  const PersistenceMeasure noise({{{5.0, 5.01}, 1.0}, {{6.0, 6.02}, 1.0}});
  const std::vector<double> w2 = optimal_weights(c, noise);
  CHECK(w2[0] == 0.0);
  CHECK(w2[1] == 0.0);
}

TEST_CASE("cell-mass weights beat random weightings under exact transport") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const PersistenceMeasure mu = random_measure(rng, 1, 6);
    const Codebook c = random_codebook(rng, 1 + static_cast<int>(rng.uniform_int(0, 2)));
    const double p = trial % 2 == 0 ? 2.0 : 1.0;
    const double opt = ot_distance(quantized_measure(c, optimal_weights(c, mu)), mu, p).value;
    for (int alt = 0; alt < 10; ++alt) {
      std::vector<double> w(c.k());
      for (double& x : w) x = rng.uniform(0.0, 2.0);
      const double other = ot_distance(quantized_measure(c, w), mu, p).value;
      CHECK(opt <= other + 1e-9);
    }
  }
}

TEST_CASE("distortion closed forms and identities") {
  const Codebook c({{0.0, 2.0}, {1.0, 3.0}});
  const PersistenceMeasure support({{{0.0, 2.0}, 1.0}, {{1.0, 3.0}, 0.5}});
  CHECK(distortion(c, support, 2.0) == 0.0);
  CHECK(distortion(c, support, kInf) == 0.0);
  CHECK(distortion(c, PersistenceMeasure{}, 2.0) == 0.0);
  CHECK(distortion(c, PersistenceMeasure{}, kInf) == 0.0);
}

TEST_CASE("distortion^p equals the exact transport cost to the cell-weighted codebook") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const PersistenceMeasure mu = random_measure(rng, 1, 8);
    const Codebook c = random_codebook(rng, 1 + static_cast<int>(rng.uniform_int(0, 2)));
    const double p = trial % 2 == 0 ? 2.0 : 1.0;
    const double direct = std::pow(distortion(c, mu, p), p);
    const double transported =
        std::pow(ot_distance(quantized_measure(c, optimal_weights(c, mu)), mu, p).value, p);
    CHECK(direct == Catch::Approx(transported).margin(1e-9));
  }
}

TEST_CASE("p_center closed forms") {
  const std::vector<Atom> cell{{{0.0, 2.0}, 1.0}, {{0.0, 4.0}, 1.0}};
  const HalfPlanePoint mean = p_center(cell, 2.0);
  CHECK(mean.birth == Catch::Approx(0.0).margin(1e-12));
  CHECK(mean.death == Catch::Approx(3.0).margin(1e-12));

  const std::vector<Atom> three{{{0.0, 2.0}, 1.0}, {{0.0, 4.0}, 1.0}, {{1.0, 3.0}, 1.0}};
  const HalfPlanePoint center = p_center(three, kInf);
  CHECK(center.birth == Catch::Approx(0.0).margin(1e-9));
  CHECK(center.death == Catch::Approx(3.0).margin(1e-9));

  CHECK_THROWS_AS(p_center({}, 2.0), std::invalid_argument);
}

TEST_CASE("smallest enclosing circle is no larger than any brute-force candidate") {
  Rng rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 11));
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
      xs.push_back(rng.uniform(-1.0, 1.0));
      ys.push_back(rng.uniform(-1.0, 1.0));
    }
    const Circle mec = minimal_enclosing_circle(xs, ys);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(circle_contains(mec, xs[i], ys[i]));
    const auto candidates = oracles::enclosing_circle_candidates(xs, ys);
    REQUIRE(!candidates.empty());
    for (const Circle& cand : candidates) CHECK(mec.r2 <= cand.r2 * (1 + 1e-12) + 1e-30);
  }
}

TEST_CASE("general-p center is locally optimal") {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Atom> cell;
    for (int i = 0; i < 5; ++i) {
      const double birth = rng.uniform(0.0, 1.0);
      cell.push_back({{birth, birth + rng.uniform(0.1, 1.0)}, rng.uniform(0.5, 1.5)});
    }
    const double p = 4.0;
    const HalfPlanePoint y = p_center(cell, p);
    const double fy = detail::center_objective(cell, y, p);
    for (int probe = 0; probe < 2000; ++probe) {
      const double r = rng.uniform(1e-6, 0.05);
      const double ang = rng.uniform(0.0, 2 * 3.14159265358979323846);
      const HalfPlanePoint z{y.birth + r * std::cos(ang), y.death + r * std::sin(ang)};
      CHECK(fy <= detail::center_objective(cell, z, p) + 1e-12);
    }
  }
}

TEST_CASE("fractional-p center drives the scaled gradient to zero") {
  Rng rng(26);
  for (const double p : {1.5, 3.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Atom> cell;
      for (int i = 0; i < 6; ++i) {
        const double birth = rng.uniform(0.0, 1.0);
        cell.push_back({{birth, birth + rng.uniform(0.1, 1.0)}, rng.uniform(0.5, 1.5)});
      }
      const HalfPlanePoint y = p_center(cell, p);
      double gx, gy;
      REQUIRE(detail::center_gradient(cell, y, p, gx, gy));
      CHECK(detail::rooted_gradient_norm(detail::center_objective(cell, y, p), gx, gy, p) <= 1e-8);
    }
  }
}

TEST_CASE("update_step hand examples") {
  const PersistenceMeasure mu({{{0.0, 2.0}, 1.0}, {{0.0, 4.0}, 1.0}});
  const Codebook c({{0.0, 2.5}});

  const Codebook full = update_step(0, c, mu, mu, 2.0);
  CHECK(full.centroids[0].birth == Catch::Approx(0.0).margin(1e-12));
  CHECK(full.centroids[0].death == Catch::Approx(3.0).margin(1e-12));

  const Codebook fixed = update_step(0, Codebook({{0.0, 3.0}}), mu, mu, 2.0);
  CHECK(fixed.centroids[0].birth == Catch::Approx(0.0).margin(1e-12));
  CHECK(fixed.centroids[0].death == Catch::Approx(3.0).margin(1e-12));

  const Codebook tenth = update_step(9, c, mu, mu, 2.0);
  CHECK(tenth.centroids[0].death == Catch::Approx(2.55).margin(1e-12));
}

TEST_CASE("update_step skips cells that are empty in either half") {
  const Codebook c({{0.0, 2.0}, {5.0, 9.0}});
  const PersistenceMeasure mu({{{0.0, 2.2}, 1.0}});  // only cell 0 populated
  const Codebook next = update_step(0, c, mu, mu, 2.0);
  CHECK(next.centroids[1] == c.centroids[1]);
  CHECK(next.centroids[0].death == Catch::Approx(2.2).margin(1e-12));
}

TEST_CASE("update_step clamps centroids back above the diagonal") {
  // Mass ratio 20 with step 1 overshoots far past the cell mean, across the
  // diagonal.
  const Codebook c({{0.0, 1.0}});
  const PersistenceMeasure m1({{{0.0, 0.9}, 20.0}});
  const PersistenceMeasure m2({{{0.0, 0.9}, 1.0}});
  const Codebook next = update_step(0, c, m1, m2, 2.0);
  CHECK(above_diagonal(next.centroids[0]));
  CHECK(persistence(next.centroids[0]) == Catch::Approx(1e-9));
}

TEST_CASE("online_quantize is a fixed point on its own support") {
  Rng rng(27);
  const PersistenceMeasure d({{{0.1, 1.0}, 1.0}, {{0.5, 2.0}, 1.0}});
  const std::vector<PersistenceMeasure> diagrams(8, d);
  for (const double p : {2.0, kInf}) {
    const Codebook out = online_quantize(diagrams, 2, p, 2);
    const Codebook init = top_persistence_init(d, 2);
    REQUIRE(out.k() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(out.centroids[j].birth == Catch::Approx(init.centroids[j].birth).margin(1e-9));
      CHECK(out.centroids[j].death == Catch::Approx(init.centroids[j].death).margin(1e-9));
    }
  }
}

TEST_CASE("online_quantize with a single batch is one update step") {
  Rng rng(28);
  std::vector<PersistenceMeasure> diagrams;
  for (int i = 0; i < 4; ++i) diagrams.push_back(random_measure(rng, 2, 5));
  const Codebook init = top_persistence_init(diagrams[0], 2);
  const Codebook direct = online_quantize(diagrams, 2, 2.0, 4, init);

  std::vector<Atom> pooled;
  for (const auto& d : diagrams)
    for (const Atom& a : d.atoms()) pooled.push_back({a.point, a.mass / 4.0});
  const PersistenceMeasure batch(std::move(pooled));
  const Codebook manual = update_step(0, init, batch, batch, 2.0);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(direct.centroids[j].birth == Catch::Approx(manual.centroids[j].birth).margin(1e-12));
    CHECK(direct.centroids[j].death == Catch::Approx(manual.centroids[j].death).margin(1e-12));
  }
}

TEST_CASE("online_quantize validates its input") {
  CHECK_THROWS_AS(online_quantize({}, 2, 2.0, 1), std::invalid_argument);
  const std::vector<PersistenceMeasure> one{PersistenceMeasure({{{0.0, 1.0}, 1.0}})};
  CHECK_THROWS_AS(online_quantize(one, 2, 2.0, 1), std::invalid_argument);  // k > init points
  CHECK_THROWS_AS(online_quantize(one, 1, 2.0, 5), std::invalid_argument);  // batch > n
}

TEST_CASE("online_quantize recovers two synthetic clusters") {
  Rng rng(29);
  const HalfPlanePoint center_a{0.2, 0.9}, center_b{0.5, 1.4};
  std::vector<PersistenceMeasure> diagrams;
  for (int i = 0; i < 400; ++i) {
    std::vector<Atom> atoms;
    for (const auto& c : {center_a, center_b}) {
      atoms.push_back({{c.birth + rng.uniform(-0.02, 0.02), c.death + rng.uniform(-0.02, 0.02)}, 1.0});
    }
    const double noise_birth = rng.uniform(0.0, 1.5);
    atoms.push_back({{noise_birth, noise_birth + rng.uniform(0.005, 0.05)}, 1.0});
    diagrams.push_back(PersistenceMeasure(std::move(atoms)));
  }
  const Codebook out = online_quantize(diagrams, 2, 2.0, 10);
  REQUIRE(out.k() == 2);
  for (const auto& target : {center_a, center_b}) {
    double best = 1e9;
    for (const auto& c : out.centroids) best = std::min(best, distance(c, target));
    CHECK(best <= 0.05);
  }
}

TEST_CASE("split batches feed disjoint halves but stay near the no-split run") {
  Rng rng(30);
  std::vector<PersistenceMeasure> diagrams;
  for (int i = 0; i < 60; ++i) {
    std::vector<Atom> atoms;
    atoms.push_back({{0.2 + rng.uniform(-0.05, 0.05), 1.0 + rng.uniform(-0.05, 0.05)}, 1.0});
    diagrams.push_back(PersistenceMeasure(std::move(atoms)));
  }
  const Codebook split = online_quantize(diagrams, 1, 2.0, 6, std::nullopt, true);
  const Codebook merged = online_quantize(diagrams, 1, 2.0, 6, std::nullopt, false);
  CHECK(distance(split.centroids[0], merged.centroids[0]) <= 0.1);
}

TEST_CASE("no-diagonal baseline matches the diagonal method without near-diagonal mass") {
  Rng rng(31);
  std::vector<PersistenceMeasure> diagrams;
  for (int i = 0; i < 40; ++i) {
    std::vector<Atom> atoms;
    // Two far clusters, nothing near the diagonal.
    atoms.push_back({{0.1 + rng.uniform(-0.02, 0.02), 2.0 + rng.uniform(-0.02, 0.02)}, 1.0});
    atoms.push_back({{1.0 + rng.uniform(-0.02, 0.02), 4.0 + rng.uniform(-0.02, 0.02)}, 1.0});
    diagrams.push_back(PersistenceMeasure(std::move(atoms)));
  }
  const Codebook with_diag = online_quantize(diagrams, 2, 2.0, 5);
  const Codebook without = lloyd_no_diagonal(diagrams, 2, 2.0, 5);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(distance(with_diag.centroids[j], without.centroids[j]) <= 1e-6);
}

TEST_CASE("no-diagonal baseline is pulled toward diagonal noise") {
  Rng rng(32);
  std::vector<PersistenceMeasure> diagrams;
  for (int i = 0; i < 200; ++i) {
    std::vector<Atom> atoms;
    atoms.push_back({{0.2 + rng.uniform(-0.02, 0.02), 2.0 + rng.uniform(-0.02, 0.02)}, 1.0});
    for (int j = 0; j < 6; ++j) {
      const double b = rng.uniform(0.0, 2.0);
      atoms.push_back({{b, b + rng.uniform(0.01, 0.08)}, 1.0});
    }
    diagrams.push_back(PersistenceMeasure(std::move(atoms)));
  }
  const Codebook init = top_persistence_init(diagrams[0], 1);
  const Codebook ours = online_quantize(diagrams, 1, 2.0, 10, init);
  const Codebook baseline = lloyd_no_diagonal(diagrams, 1, 2.0, 10, init);
  CHECK(persistence(baseline.centroids[0]) < persistence(ours.centroids[0]));
}

TEST_CASE("lloyd_no_diagonal fixed point on exact support") {
  const PersistenceMeasure d({{{0.0, 1.0}, 1.0}, {{2.0, 4.0}, 1.0}});
  const std::vector<PersistenceMeasure> diagrams(6, d);
  const Codebook out = lloyd_no_diagonal(diagrams, 2, 2.0, 3);
  const Codebook init = top_persistence_init(d, 2);
  for (std::size_t j = 0; j < 2; ++j) CHECK(distance(out.centroids[j], init.centroids[j]) <= 1e-12);
}

TEST_CASE("one full-batch mean sweep never increases p=2 distortion") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const PersistenceMeasure mu = random_measure(rng, 4, 12);
    const Codebook c = random_codebook(rng, 2);
    // t = 0 with equal halves moves each centroid to its cell mean.
    const Codebook swept = update_step(0, c, mu, mu, 2.0);
    CHECK(distortion(swept, mu, 2.0) <= distortion(c, mu, 2.0) + 1e-12);
  }
}

TEST_CASE("grid search on a small measure finds optima with positive cell masses") {
  // Coarse exhaustive search over codebook pairs validates that optimal
  // codebooks have distinct centroids and nonempty cells.
  const PersistenceMeasure mu({{{0.1, 0.9}, 1.0},
                               {{0.15, 1.0}, 1.0},
                               {{0.8, 1.9}, 1.0},
                               {{0.85, 2.0}, 1.0},
                               {{0.5, 0.55}, 0.5}});
  std::vector<HalfPlanePoint> grid_pts;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) {
      const double birth = 0.0 + 0.1 * i;
      const double death = birth + 0.05 + 0.2 * j;
      grid_pts.push_back({birth, death});
    }
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> best_pair{0, 0};
  for (std::size_t a = 0; a < grid_pts.size(); ++a)
    for (std::size_t b = a + 1; b < grid_pts.size(); ++b) {
      const Codebook c({grid_pts[a], grid_pts[b]});
      const double r = distortion(c, mu, 2.0);
      if (r < best) {
        best = r;
        best_pair = {a, b};
      }
    }
  const Codebook winner({grid_pts[best_pair.first], grid_pts[best_pair.second]});
  const std::vector<double> w = optimal_weights(winner, mu);
  CHECK(w[0] > 0.0);
  CHECK(w[1] > 0.0);
  CHECK(!(winner.centroids[0] == winner.centroids[1]));
}

TEST_CASE("weighted codebook: clamped weights and quantile fallback") {
  Rng rng(34);
  // Constant persistence: quantiles collapse, uniform fallback kicks in.
  std::vector<PersistenceMeasure> flat;
  for (int i = 0; i < 10; ++i) {
    const double b = rng.uniform(0.0, 1.0);
    flat.push_back(PersistenceMeasure({{{b, b + 0.5}, 1.0}}));
  }
  const Codebook fallback = weighted_codebook(flat, 1, {}, 99);
  CHECK(fallback.k() == 1);

  // A single tight cluster: k = 1 recovers its mean.
  std::vector<PersistenceMeasure> cluster;
  for (int i = 0; i < 50; ++i) {
    cluster.push_back(PersistenceMeasure(
        {{{0.3 + rng.uniform(-0.02, 0.02), 1.2 + rng.uniform(-0.02, 0.02)}, 1.0}}));
  }
  const Codebook out = weighted_codebook(cluster, 1, {}, 7);
  CHECK(distance(out.centroids[0], {0.3, 1.2}) <= 0.05);
}

TEST_CASE("weighted codebook gives zero sampling weight below the low quantile") {
  std::vector<Atom> atoms;
  // 100 low-persistence points and 5 high ones.
  Rng rng(35);
  for (int i = 0; i < 100; ++i) {
    const double b = rng.uniform(0.0, 1.0);
    atoms.push_back({{b, b + 0.01 + 0.001 * i}, 1.0});
  }
  for (int i = 0; i < 5; ++i) atoms.push_back({{0.2, 1.5 + 0.01 * i}, 1.0});
  const PersistenceMeasure epd(std::move(atoms));

  std::vector<double> pers_q;
  for (const Atom& a : epd.atoms()) pers_q.push_back(persistence(a.point));
  std::sort(pers_q.begin(), pers_q.end());
  const double lambda = detail::interpolated_quantile(pers_q, 0.05);
  for (const Atom& a : epd.atoms()) {
    const double w = std::clamp((persistence(a.point) - lambda) / 1.0, 0.0, 1.0);
    if (persistence(a.point) < lambda) CHECK(w == 0.0);
  }
}

TEST_CASE("margin profile: zero far from boundaries, saturates, non-decreasing") {
  const Codebook c({{0.0, 2.0}, {3.0, 6.0}});
  const PersistenceMeasure mu({{{0.0, 2.0}, 1.0}, {{3.0, 6.0}, 2.0}});
  const auto profile = margin_profile(mu, c, {1e-4, 1e3});
  CHECK(profile[0].second == 0.0);
  CHECK(profile[1].second == Catch::Approx(mu.total_mass()));

  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const PersistenceMeasure m = random_measure(rng, 1, 10);
    const Codebook cb = random_codebook(rng, 2);
    std::vector<double> radii;
    for (int i = 0; i < 8; ++i) radii.push_back(rng.uniform(0.0, 2.0));
    std::sort(radii.begin(), radii.end());
    const auto prof = margin_profile(m, cb, radii);
    for (std::size_t i = 1; i < prof.size(); ++i) CHECK(prof[i].second >= prof[i - 1].second);
  }
}

TEST_CASE("distance to the diagonal-cell parabola matches a dense scan") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const double fb = rng.uniform(0.2, 2.0);
    const DiagonalCoords focus{rng.uniform(-1.0, 1.0), fb};
    const DiagonalCoords q{rng.uniform(-2.0, 2.0), rng.uniform(0.0, 3.0)};
    const double fast = detail::distance_to_parabola(q, focus);
    double slow = std::numeric_limits<double>::infinity();
    for (int i = -40000; i <= 40000; ++i) {
      const double t = i * 1e-3;
      const double u = t - focus.along;
      const double h = u * u / (2 * fb) + fb / 2;
      slow = std::min(slow, std::hypot(t - q.along, h - q.height));
    }
    CHECK(fast == Catch::Approx(slow).margin(1e-4));
  }
}
