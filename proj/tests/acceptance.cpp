// Acceptance suite: runs every top-level requirement at its stated tolerance
// and prints one pass/fail line per criterion. Exit code is the number of
// failures. Flags: --only 1,4,5  --threads N
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "epdq/experiments.hpp"
#include "epdq/generators.hpp"
#include "epdq/homology.hpp"
#include "epdq/measures.hpp"
#include "epdq/quantize.hpp"
#include "epdq/rng.hpp"
#include "epdq/transport.hpp"
#include "oracles.hpp"

using namespace epdq;

namespace {

int g_threads = 0;
const double kInf = std::numeric_limits<double>::infinity();

struct Criterion {
  int id;
  const char* title;
  bool (*run)(std::string& detail);
};

std::vector<HalfPlanePoint> random_points(Rng& rng, int max_count, double spread = 1.0) {
  const int n = static_cast<int>(rng.uniform_int(0, max_count));
  std::vector<HalfPlanePoint> pts;
  for (int i = 0; i < n; ++i) {
    const double birth = rng.uniform(0.0, spread);
    pts.push_back({birth, birth + rng.uniform(1e-3, spread)});
  }
  return pts;
}

PersistenceMeasure random_fractional(Rng& rng, int min_atoms, int max_atoms) {
  std::vector<Atom> atoms;
  const int n = static_cast<int>(rng.uniform_int(min_atoms, max_atoms));
  for (int i = 0; i < n; ++i) {
    const double birth = rng.uniform(0.0, 1.0);
    atoms.push_back({{birth, birth + rng.uniform(1e-3, 1.0)}, rng.uniform(0.05, 2.0)});
  }
  return PersistenceMeasure(std::move(atoms));
}

// --- criterion 1: triangle-model convergence rate ---------------------------

bool criterion_triangle_rate(std::string& detail) {
  TriangleConvergenceConfig cfg;
  cfg.n_list = {10, 21, 46, 100, 215, 464, 1000};
  cfg.reps = 20;
  cfg.grid = {0.0, 1.0, 0.0, 2.0, 50, 50};
  cfg.p = 2.0;
  cfg.seed = 20210607;
  cfg.threads = g_threads;
  const ConvergenceResult result = run_convergence_triangles(cfg);
  const auto means = per_n_means(result.records, "hist");
  int inversions = 0;
  for (std::size_t i = 1; i < means.size(); ++i)
    if (means[i].second > means[i - 1].second) ++inversions;
  char buf[160];
  std::snprintf(buf, sizeof buf, "slope %.4f (window [-0.70, -0.40], r2 %.3f, %d mean inversion(s))",
                result.regression.slope, result.regression.r2, inversions);
  detail = buf;
  return result.regression.slope >= -0.70 && result.regression.slope <= -0.40 && inversions <= 1;
}

// --- criterion 2: torus convergence rate (desk-scale substitute) ------------

bool criterion_torus_rate(std::string& detail) {
  TorusConvergenceConfig cfg;
  cfg.n_list = {10, 18, 32, 56, 100};
  cfg.n_max = 100;
  cfg.reps = 5;
  cfg.cloud_size = 250;
  cfg.p = 2.0;
  cfg.seed = 20210608;
  cfg.threads = g_threads;
  const ConvergenceResult result = run_convergence_torus(cfg);
  char buf[160];
  std::snprintf(buf, sizeof buf, "slope %.4f (window [-0.75, -0.30], r2 %.3f)", result.regression.slope,
                result.regression.r2);
  detail = buf;
  return result.regression.slope >= -0.75 && result.regression.slope <= -0.30;
}

// --- criterion 3: quantization comparison ------------------------------------

struct TwoMeans {
  HalfPlanePoint a, b;
};

TwoMeans high_persistence_clusters(const PersistenceMeasure& mu) {
  std::vector<double> pers;
  for (const Atom& atom : mu.atoms()) pers.push_back(persistence(atom.point));
  std::vector<double> sorted = pers;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::vector<HalfPlanePoint> pts;
  for (std::size_t i = 0; i < pers.size(); ++i)
    if (pers[i] > median) pts.push_back(mu.atoms()[i].point);

  // 2-means, initialized at the farthest pair.
  std::size_t ia = 0, ib = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (distance(pts[i], pts[j]) > best) {
        best = distance(pts[i], pts[j]);
        ia = i;
        ib = j;
      }
  HalfPlanePoint ca = pts[ia], cb = pts[ib];
  for (int iter = 0; iter < 100; ++iter) {
    double ax = 0, ay = 0, bx = 0, by = 0;
    int na = 0, nb = 0;
    for (const auto& p : pts) {
      if (distance(p, ca) <= distance(p, cb)) {
        ax += p.birth;
        ay += p.death;
        ++na;
      } else {
        bx += p.birth;
        by += p.death;
        ++nb;
      }
    }
    if (na == 0 || nb == 0) break;
    const HalfPlanePoint next_a{ax / na, ay / na}, next_b{bx / nb, by / nb};
    if (distance(next_a, ca) + distance(next_b, cb) < 1e-12) break;
    ca = next_a;
    cb = next_b;
  }
  return {ca, cb};
}

bool criterion_quantization(std::string& detail) {
  QuantizationConfig cfg;
  cfg.k_list = {1, 2, 3, 4, 5};
  cfg.n = 60;
  cfg.batch_size = 10;
  cfg.reps = 10;
  cfg.seed = 20210609;
  cfg.threads = g_threads;
  const QuantizationResult result = run_quantization_comparison(cfg);

  // (a) at k = 2, the diagonal-aware codebook puts one centroid in each
  // high-persistence cluster of the pooled diagram.
  int cluster_hits = 0;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const TwoMeans clusters = high_persistence_clusters(result.averages[rep]);
    const Codebook& book = result.codebooks.at({rep, 2, "ot2"});
    std::set<int> covered;
    for (const auto& c : book.centroids)
      covered.insert(distance(c, clusters.a) <= distance(c, clusters.b) ? 0 : 1);
    if (covered.size() == 2) ++cluster_hits;
  }

  // (b) mean max-distortion: the p = inf method beats the no-diagonal
  // baseline at every k.
  bool dominance = true;
  std::string worst;
  for (const int k : cfg.k_list) {
    double ot_inf = 0.0, w2 = 0.0;
    int count = 0;
    for (const ExperimentRecord& r : result.records_dinf) {
      if (r.n_or_k != k) continue;
      if (r.method == "otinf") {
        ot_inf += r.value;
        ++count;
      }
      if (r.method == "w2") w2 += r.value;
    }
    if (ot_inf > w2) {
      dominance = false;
      char buf[96];
      std::snprintf(buf, sizeof buf, " k=%d: otinf %.4f > w2 %.4f;", k, ot_inf / count, w2 / count);
      worst += buf;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "cluster placement %d/%d reps, max-distortion dominance %s%s", cluster_hits, cfg.reps,
                dominance ? "at every k" : "violated:", worst.c_str());
  detail = buf;
  return cluster_hits == cfg.reps && dominance;
}

// --- criterion 4: exact-solver oracle ---------------------------------------

bool criterion_solver_oracle(std::string& detail) {
  Rng rng(424242);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto xs = random_points(rng, 4);
    const auto ys = random_points(rng, 4);
    const PersistenceMeasure mu = PersistenceMeasure::from_points(xs);
    const PersistenceMeasure nu = PersistenceMeasure::from_points(ys);
    const double p = trial % 2 == 0 ? 2.0 : 1.0;
    const double expected = oracles::brute_force_ot_cost(xs, ys, p);
    const double got = std::pow(ot_distance(mu, nu, p).value, p);
    worst_gap = std::max(worst_gap, std::abs(expected - got));
    if (std::abs(expected - got) > 1e-9) {
      detail = "finite-p mismatch vs enumeration";
      return false;
    }
    const double bexp = oracles::brute_force_bottleneck(xs, ys);
    const double bgot = bottleneck_distance(mu, nu).value;
    if (bexp != bgot) {
      detail = "bottleneck mismatch vs enumeration";
      return false;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "200 pairs, worst finite-p gap %.2e, bottleneck exact", worst_gap);
  detail = buf;
  return true;
}

// --- criterion 5: cell-mass weights are optimal ------------------------------

bool criterion_weight_optimality(std::string& detail) {
  Rng rng(535353);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PersistenceMeasure mu = random_fractional(rng, 1, 8);
    std::vector<HalfPlanePoint> centroids;
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 2));
    for (int j = 0; j < k; ++j) {
      const double birth = rng.uniform(0.0, 1.0);
      centroids.push_back({birth, birth + rng.uniform(0.05, 1.0)});
    }
    const Codebook c(centroids);
    const double p = trial % 2 == 0 ? 2.0 : 1.0;
    auto as_measure = [&](const std::vector<double>& w) {
      std::vector<Atom> atoms;
      for (std::size_t j = 0; j < c.k(); ++j) atoms.push_back({c.centroids[j], w[j]});
      return PersistenceMeasure(std::move(atoms));
    };
    const double opt = ot_distance(as_measure(optimal_weights(c, mu)), mu, p).value;
    for (int alt = 0; alt < 50; ++alt) {
      std::vector<double> w(c.k());
      for (double& x : w) x = rng.uniform(0.0, 2.5);
      if (opt > ot_distance(as_measure(w), mu, p).value + 1e-9) ++violations;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 instances x 50 weightings, %d violation(s)", violations);
  detail = buf;
  return violations == 0;
}

// --- criterion 6: distortion equals transport cost ---------------------------

bool criterion_distortion_identity(std::string& detail) {
  Rng rng(636363);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PersistenceMeasure mu = random_fractional(rng, 1, 8);
    std::vector<HalfPlanePoint> centroids;
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 2));
    for (int j = 0; j < k; ++j) {
      const double birth = rng.uniform(0.0, 1.0);
      centroids.push_back({birth, birth + rng.uniform(0.05, 1.0)});
    }
    const Codebook c(centroids);
    const double p = trial % 3 == 0 ? 1.0 : (trial % 3 == 1 ? 2.0 : 3.0);
    const std::vector<double> w = optimal_weights(c, mu);
    std::vector<Atom> atoms;
    for (std::size_t j = 0; j < c.k(); ++j) atoms.push_back({c.centroids[j], w[j]});
    const double direct = std::pow(distortion(c, mu, p), p);
    const double transported = std::pow(ot_distance(PersistenceMeasure(std::move(atoms)), mu, p).value, p);
    worst = std::max(worst, std::abs(direct - transported));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 instances, worst |distortion^p - cost| = %.2e", worst);
  detail = buf;
  return worst <= 1e-9;
}

// --- criterion 7: multiscale bound dominates ---------------------------------

bool criterion_multiscale_bound(std::string& detail) {
  Rng rng(737373);
  const double L = 2.0;
  int violations = 0;
  double min_slack = kInf;
  for (int trial = 0; trial < 100; ++trial) {
    auto box_measure = [&] {
      std::vector<Atom> atoms;
      const int n = 1 + static_cast<int>(rng.uniform_int(0, 5));
      for (int i = 0; i < n; ++i) {
        const DiagonalCoords c{rng.uniform(-L / 2, L / 2), rng.uniform(0.01 * L, L)};
        atoms.push_back({from_diagonal_coords(c), rng.uniform(0.1, 1.5)});
      }
      return PersistenceMeasure(std::move(atoms));
    };
    const PersistenceMeasure mu = box_measure();
    const PersistenceMeasure nu = box_measure();
    for (const double p : {1.0, 2.0}) {
      const double exact = std::pow(ot_distance(mu, nu, p).value, p);
      for (int J = 0; J <= 6; ++J) {
        const double bound = multiscale_upper_bound(mu, nu, p, J, L);
        min_slack = std::min(min_slack, bound - exact);
        if (bound < exact - 1e-10) ++violations;
      }
    }
  }
  char buf[112];
  std::snprintf(buf, sizeof buf, "100 pairs x J=0..6 x p={1,2}, %d violation(s), min slack %.3e", violations,
                min_slack);
  detail = buf;
  return violations == 0;
}

// --- criterion 8: closed form vs monte-carlo ---------------------------------

bool criterion_closed_form(std::string& detail) {
  Rng rng(838383);
  Rng boxes(848484);
  const TriangleModelParams params{0, 20};  // mean 10 matches the closed form
  double worst_z = 0.0;
  for (int box = 0; box < 10; ++box) {
    const double r1 = boxes.uniform(0.0, 0.8);
    const double r2 = r1 + boxes.uniform(0.02, 0.2);
    const double s1 = r2 + boxes.uniform(0.0, 0.6);
    const double s2 = s1 + boxes.uniform(0.05, 0.8);
    const double expected = closed_form_epd_rect(r1, r2, s1, s2);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      int count = 0;
      const PersistenceMeasure diagram = sample_triangle_diagram(params, rng);
      for (const Atom& a : diagram.atoms())
        if (a.point.birth >= r1 && a.point.birth <= r2 && a.point.death >= s1 && a.point.death <= s2) ++count;
      sum += count;
      sum_sq += static_cast<double>(count) * count;
    }
    const double mean = sum / draws;
    const double sigma = std::sqrt(std::max((sum_sq - sum * sum / draws) / (draws - 1), 1e-12) / draws);
    const double z = std::abs(mean - expected) / sigma;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "rect [%.2f,%.2f]x[%.2f,%.2f]: z = %.2f", r1, r2, s1, s2, z);
      detail = buf;
      return false;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "10 rectangles x 1e5 draws, worst z-score %.2f", worst_z);
  detail = buf;
  return true;
}

// --- criterion 9: homology oracle --------------------------------------------

bool criterion_homology_oracle(std::string& detail) {
  Rng rng(939393);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point3> cloud;
    const bool planar = trial % 2 == 0;
    for (int i = 0; i < 8; ++i)
      cloud.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), planar ? 0.0 : rng.uniform(0.0, 1.0)});
    const Filtration f = cech_filtration(cloud, 0.7);
    for (const int dim : {0, 1}) {
      const PersistencePairsResult fast = persistence_pairs(f, dim);
      const auto [naive, naive_infinite] = oracles::naive_persistence(f, dim);
      std::vector<std::pair<double, double>> a, b;
      for (const Atom& atom : fast.diagram.atoms()) a.push_back({atom.point.birth, atom.point.death});
      for (const auto& pair : naive) b.push_back({pair.birth, pair.death});
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b || fast.dropped_infinite != naive_infinite) {
        detail = "mismatch vs clearing-free reduction";
        return false;
      }
    }
  }
  const double side = 1.1;
  const Filtration tri = cech_filtration({{0, 0, 0}, {side, 0, 0}, {side / 2, side * std::sqrt(3.0) / 2, 0}}, 5.0);
  const PersistenceMeasure h1 = persistence_pairs(tri, 1).diagram;
  if (h1.size() != 1 || std::abs(h1.atoms()[0].point.birth - side / 2) > 1e-12 ||
      std::abs(h1.atoms()[0].point.death - side / std::sqrt(3.0)) > 1e-12) {
    detail = "equilateral-triangle H1 pair off by more than 1e-12";
    return false;
  }
  detail = "50 clouds exact, equilateral pair within 1e-12";
  return true;
}

// --- criterion 10: smallest enclosing circle ----------------------------------

bool criterion_enclosing_circle(std::string& detail) {
  Rng rng(101010);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 11));
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
      xs.push_back(rng.uniform(-1.0, 1.0));
      ys.push_back(rng.uniform(-1.0, 1.0));
    }
    const Circle mec = minimal_enclosing_circle(xs, ys);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!circle_contains(mec, xs[i], ys[i])) {
        detail = "returned circle misses an input point";
        return false;
      }
    for (const Circle& cand : oracles::enclosing_circle_candidates(xs, ys))
      if (mec.r2 > cand.r2 * (1 + 1e-12) + 1e-30) {
        detail = "a brute-force candidate is smaller";
        return false;
      }
  }
  detail = "100 point sets, radius minimal among all candidates";
  return true;
}

// --- criterion 11: determinism ------------------------------------------------

bool criterion_determinism(std::string& detail) {
  {
    TriangleConvergenceConfig cfg;
    cfg.n_list = {5, 20};
    cfg.reps = 3;
    cfg.grid.nx = cfg.grid.ny = 16;
    cfg.seed = 77;
    cfg.threads = 2;
    const std::string a = emit_csv(run_convergence_triangles(cfg).records);
    cfg.threads = 1;
    const std::string b = emit_csv(run_convergence_triangles(cfg).records);
    if (a != b) {
      detail = "convergence-triangles rerun differs";
      return false;
    }
  }
  {
    TorusConvergenceConfig cfg;
    cfg.n_list = {2, 5};
    cfg.n_max = 5;
    cfg.reps = 2;
    cfg.cloud_size = 40;
    cfg.radius_fraction = 0.2;
    cfg.seed = 78;
    cfg.threads = 2;
    const std::string a = emit_csv(run_convergence_torus(cfg).records);
    cfg.threads = 1;
    const std::string b = emit_csv(run_convergence_torus(cfg).records);
    if (a != b) {
      detail = "convergence-torus rerun differs";
      return false;
    }
  }
  {
    QuantizationConfig cfg;
    cfg.k_list = {1, 2};
    cfg.n = 6;
    cfg.batch_size = 3;
    cfg.reps = 2;
    cfg.torus.mean_points = 50.0;
    cfg.radius_fraction = 0.22;
    cfg.seed = 79;
    cfg.threads = 2;
    const QuantizationResult a = run_quantization_comparison(cfg);
    cfg.threads = 1;
    const QuantizationResult b = run_quantization_comparison(cfg);
    if (emit_csv(a.records_d2) != emit_csv(b.records_d2) || emit_csv(a.records_dinf) != emit_csv(b.records_dinf)) {
      detail = "quantization rerun differs";
      return false;
    }
  }
  detail = "all three experiments byte-identical across reruns and thread counts";
  return true;
}

const Criterion kCriteria[] = {
    {1, "triangle-model convergence slope", criterion_triangle_rate},
    {2, "torus convergence slope (desk scale)", criterion_torus_rate},
    {3, "quantization: cluster placement and max-distortion dominance", criterion_quantization},
    {4, "transport solvers vs exhaustive enumeration", criterion_solver_oracle},
    {5, "cell-mass weights optimal among weightings", criterion_weight_optimality},
    {6, "distortion^p equals exact transport cost", criterion_distortion_identity},
    {7, "multiscale bound dominates exact cost", criterion_multiscale_bound},
    {8, "closed-form rectangle mass vs monte-carlo", criterion_closed_form},
    {9, "persistence pairs vs clearing-free reduction", criterion_homology_oracle},
    {10, "smallest enclosing circle vs brute force", criterion_enclosing_circle},
    {11, "byte-identical experiment reruns", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::string arg = argv[++i];
      std::stringstream ss(arg);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) {
      g_threads = std::stoi(argv[++i]);
    }
  }

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id, c.title, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
