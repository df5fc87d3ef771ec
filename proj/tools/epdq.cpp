#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "epdq/experiments.hpp"
#include "epdq/generators.hpp"
#include "epdq/homology.hpp"
#include "epdq/log.hpp"
#include "epdq/measures.hpp"
#include "epdq/quantize.hpp"
#include "epdq/transport.hpp"

namespace fs = std::filesystem;
using namespace epdq;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

double parse_p(const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "INF") return std::numeric_limits<double>::infinity();
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid --p value: " + text);
  }
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    values.push_back(std::stoi(token));
  }
  if (values.empty()) throw std::invalid_argument("empty integer list");
  return values;
}

std::vector<PersistenceMeasure> load_diagram_dir(const fs::path& dir, bool from_clouds, double radius_fraction) {
  if (!from_clouds) return load_dgm_directory(dir);
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".xyz" || ext == ".txt" || ext == ".pts") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no point cloud files (*.xyz, *.txt, *.pts) in " + dir.string());
  std::vector<PersistenceMeasure> diagrams;
  for (const auto& file : files) {
    const std::vector<Point3> cloud = load_point_cloud(file);
    if (cloud.size() < 2) throw DataError(file.string() + ": need at least 2 points");
    const Filtration filtration = cech_filtration(cloud, radius_fraction * cloud_diameter(cloud));
    const PersistencePairsResult pairs = persistence_pairs(filtration, 1);
    log(LogLevel::info, "%s: %zu H1 pairs (%zu infinite dropped)", file.string().c_str(), pairs.diagram.size(),
        pairs.dropped_infinite);
    diagrams.push_back(pairs.diagram);
  }
  return diagrams;
}

int run(int argc, char** argv) {
  CLI::App app{"persistence-measure transport, averaging and quantization"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "sample diagrams or point clouds");
  gen->require_subcommand(1);
  struct {
    int count = 10;
    std::string out;
    std::uint64_t seed = 1;
    TriangleModelParams model;
  } gen_tri_opts;
  auto* gen_tri = gen->add_subcommand("triangles", "triangle-model diagrams (.dgm files)");
  gen_tri->add_option("--count", gen_tri_opts.count, "number of diagrams")->check(CLI::PositiveNumber);
  gen_tri->add_option("--out", gen_tri_opts.out, "output directory")->required();
  gen_tri->add_option("--seed", gen_tri_opts.seed, "RNG seed");
  gen_tri->add_option("--n-min", gen_tri_opts.model.n_min, "triangle count lower bound");
  gen_tri->add_option("--n-max", gen_tri_opts.model.n_max, "triangle count upper bound");
  gen_tri->callback([&] {
    fs::create_directories(gen_tri_opts.out);
    for (int i = 0; i < gen_tri_opts.count; ++i) {
      Rng rng(derive_stream(gen_tri_opts.seed, static_cast<std::uint64_t>(i)));
      char name[32];
      std::snprintf(name, sizeof name, "dgm_%04d.dgm", i);
      save_dgm(sample_triangle_diagram(gen_tri_opts.model, rng), fs::path(gen_tri_opts.out) / name);
    }
    std::printf("wrote %d diagram(s) to %s\n", gen_tri_opts.count, gen_tri_opts.out.c_str());
  });

  struct {
    int count = 10;
    std::string out;
    std::uint64_t seed = 1;
    TorusParams torus{300.0, 5.0, 2.0, 0.1};
    int fixed_size = 0;
  } gen_torus_opts;
  auto* gen_torus = gen->add_subcommand("torus", "torus surface point clouds (.xyz files)");
  gen_torus->add_option("--count", gen_torus_opts.count, "number of clouds")->check(CLI::PositiveNumber);
  gen_torus->add_option("--out", gen_torus_opts.out, "output directory")->required();
  gen_torus->add_option("--seed", gen_torus_opts.seed, "RNG seed");
  gen_torus->add_option("--mean-points", gen_torus_opts.torus.mean_points, "Poisson mean cloud size");
  gen_torus->add_option("--r1", gen_torus_opts.torus.r1, "center-of-tube radius");
  gen_torus->add_option("--r2", gen_torus_opts.torus.r2, "tube radius");
  gen_torus->add_option("--epsilon", gen_torus_opts.torus.epsilon, "radii jitter");
  gen_torus->add_option("--fixed-size", gen_torus_opts.fixed_size,
                        "exact cloud size (disables the Poisson draw and jitter)");
  gen_torus->callback([&] {
    fs::create_directories(gen_torus_opts.out);
    for (int i = 0; i < gen_torus_opts.count; ++i) {
      Rng rng(derive_stream(gen_torus_opts.seed, static_cast<std::uint64_t>(i)));
      std::vector<Point3> cloud;
      if (gen_torus_opts.fixed_size > 0) {
        cloud = sample_torus_points(static_cast<std::size_t>(gen_torus_opts.fixed_size), gen_torus_opts.torus.r1,
                                    gen_torus_opts.torus.r2, rng);
      } else {
        cloud = sample_torus_cloud(gen_torus_opts.torus, rng);
      }
      char name[32];
      std::snprintf(name, sizeof name, "cloud_%04d.xyz", i);
      save_point_cloud(cloud, fs::path(gen_torus_opts.out) / name);
    }
    std::printf("wrote %d cloud(s) to %s\n", gen_torus_opts.count, gen_torus_opts.out.c_str());
  });

  // --- epd ---------------------------------------------------------------
  struct {
    std::string in, out;
    bool from_clouds = false;
    double radius_fraction = 0.4;
  } epd_opts;
  auto* epd = app.add_subcommand("epd", "average a directory of diagrams into an empirical EPD");
  epd->add_option("--in", epd_opts.in, "input directory (.dgm, or clouds with --from-clouds)")->required();
  epd->add_option("--out", epd_opts.out, "output .dgm file")->required();
  epd->add_flag("--from-clouds", epd_opts.from_clouds, "inputs are point clouds; take their H1 diagrams");
  epd->add_option("--radius-fraction", epd_opts.radius_fraction, "filtration cutoff as a fraction of cloud diameter");
  epd->callback([&] {
    const auto diagrams = load_diagram_dir(epd_opts.in, epd_opts.from_clouds, epd_opts.radius_fraction);
    const PersistenceMeasure average = empirical_epd(diagrams);
    save_dgm(average, epd_opts.out);
    std::printf("averaged %zu diagram(s): %zu atoms, total mass %.17g\n", diagrams.size(), average.size(),
                average.total_mass());
  });

  // --- dist --------------------------------------------------------------
  struct {
    std::string a, b, p = "2";
    std::vector<int> bins;
    std::vector<double> window;
  } dist_opts;
  auto* dist = app.add_subcommand("dist", "distance between two .dgm files");
  dist->add_option("--a", dist_opts.a, "first .dgm file")->required();
  dist->add_option("--b", dist_opts.b, "second .dgm file")->required();
  dist->add_option("--p", dist_opts.p, "transport exponent (1, 2, ... or inf)");
  dist->add_option("--bins", dist_opts.bins, "histogram bins NX NY (bin both sides first)")->expected(2);
  dist->add_option("--window", dist_opts.window, "histogram window XLO XHI YLO YHI")->expected(4);
  dist->callback([&] {
    const PersistenceMeasure a = load_dgm(dist_opts.a).measure;
    const PersistenceMeasure b = load_dgm(dist_opts.b).measure;
    const double p = parse_p(dist_opts.p);
    double value = 0.0;
    if (!dist_opts.bins.empty()) {
      if (std::isinf(p)) throw std::invalid_argument("histogram path requires finite p");
      if (dist_opts.window.size() != 4) throw std::invalid_argument("--bins requires --window");
      const GridSpec grid{dist_opts.window[0], dist_opts.window[1], dist_opts.window[2], dist_opts.window[3],
                          dist_opts.bins[0], dist_opts.bins[1]};
      value = histogram_ot(to_histogram(a, grid), to_histogram(b, grid), p);
    } else if (std::isinf(p)) {
      value = bottleneck_distance(a, b).value;
    } else {
      value = ot_distance(a, b, p).value;
    }
    std::printf("%.17g\n", value);
  });

  // --- quantize ------------------------------------------------------------
  struct {
    std::string in, out, p = "2", method = "ot";
    int k = 2;
    int batch_size = 0;  // 0: ceil(log n), floored at 2
    bool split_batches = false;
    bool from_clouds = false;
    double radius_fraction = 0.4;
    std::uint64_t seed = 1;
  } quant_opts;
  auto* quant = app.add_subcommand("quantize", "compress a diagram sample into a k-point codebook");
  quant->add_option("--in", quant_opts.in, "input directory of .dgm files")->required();
  quant->add_option("--out", quant_opts.out, "output codebook .dgm (masses = captured cell masses)")->required();
  quant->add_option("--k", quant_opts.k, "codebook size")->check(CLI::PositiveNumber);
  quant->add_option("--p", quant_opts.p, "transport exponent (finite or inf)");
  quant->add_option("--method", quant_opts.method, "ot | no-diagonal | weighted")
      ->check(CLI::IsMember({"ot", "no-diagonal", "weighted"}));
  quant->add_option("--batch-size", quant_opts.batch_size, "diagrams per update (default: ceil(log n), min 2)");
  quant->add_flag("--split-batches", quant_opts.split_batches, "feed each batch's halves separately");
  quant->add_flag("--from-clouds", quant_opts.from_clouds, "inputs are point clouds; take their H1 diagrams");
  quant->add_option("--radius-fraction", quant_opts.radius_fraction, "filtration cutoff fraction for --from-clouds");
  quant->add_option("--seed", quant_opts.seed, "RNG seed (weighted method)");
  quant->callback([&] {
    const auto diagrams = load_diagram_dir(quant_opts.in, quant_opts.from_clouds, quant_opts.radius_fraction);
    const double p = parse_p(quant_opts.p);
    int batch = quant_opts.batch_size;
    if (batch <= 0) batch = std::max(2, static_cast<int>(std::ceil(std::log(static_cast<double>(diagrams.size())))));
    batch = std::min<int>(batch, static_cast<int>(diagrams.size()));
    Codebook book;
    if (quant_opts.method == "ot") {
      book = online_quantize(diagrams, quant_opts.k, p, batch, std::nullopt, quant_opts.split_batches);
    } else if (quant_opts.method == "no-diagonal") {
      if (std::isinf(p)) throw std::invalid_argument("no-diagonal method requires finite p");
      book = lloyd_no_diagonal(diagrams, quant_opts.k, p, batch, std::nullopt, quant_opts.split_batches);
    } else {
      book = weighted_codebook(diagrams, quant_opts.k, WeightedCodebookOptions{}, quant_opts.seed);
    }
    const PersistenceMeasure average = empirical_epd(diagrams);
    const std::vector<double> weights = optimal_weights(book, average);
    std::vector<Atom> atoms;
    for (std::size_t j = 0; j < book.k(); ++j) atoms.push_back({book.centroids[j], weights[j]});
    save_dgm(PersistenceMeasure(std::move(atoms)), quant_opts.out);
    std::printf("codebook of %d centroid(s); empirical distortion p=2: %.17g, p=inf: %.17g\n", quant_opts.k,
                distortion(book, average, 2.0), distortion(book, average, std::numeric_limits<double>::infinity()));
  });

  // --- experiment ----------------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "desk-scale reproduction harnesses");
  experiment->require_subcommand(1);

  struct {
    std::string n_list = "10,21,46,100,215,464,1000";
    int reps = 20;
    int grid_bins = 50;
    int n_min = 1, n_max = 20;
    std::string p = "2";
    std::uint64_t seed = 1;
    int threads = 0;
    bool both_paths = false;
    std::string out;
  } tri_opts;
  auto* exp_tri = experiment->add_subcommand("convergence-triangles", "rate of the averaged triangle-model diagram");
  exp_tri->add_option("--n-list", tri_opts.n_list, "comma-separated sample sizes");
  exp_tri->add_option("--reps", tri_opts.reps, "repetitions per n")->check(CLI::PositiveNumber);
  exp_tri->add_option("--grid-bins", tri_opts.grid_bins, "histogram bins per axis")->check(CLI::PositiveNumber);
  exp_tri->add_option("--n-min", tri_opts.n_min, "triangle count lower bound");
  exp_tri->add_option("--n-max", tri_opts.n_max, "triangle count upper bound");
  exp_tri->add_option("--p", tri_opts.p, "transport exponent (finite)");
  exp_tri->add_option("--seed", tri_opts.seed, "master seed");
  exp_tri->add_option("--threads", tri_opts.threads, "worker threads (0: logical cores)");
  exp_tri->add_flag("--both-paths", tri_opts.both_paths, "also record the un-binned transport path");
  exp_tri->add_option("--out", tri_opts.out, "output CSV")->required();
  exp_tri->callback([&] {
    TriangleConvergenceConfig cfg;
    cfg.n_list = parse_int_list(tri_opts.n_list);
    cfg.reps = tri_opts.reps;
    cfg.grid.nx = cfg.grid.ny = tri_opts.grid_bins;
    cfg.model = TriangleModelParams{tri_opts.n_min, tri_opts.n_max};
    cfg.p = parse_p(tri_opts.p);
    cfg.seed = tri_opts.seed;
    cfg.threads = tri_opts.threads;
    cfg.both_paths = tri_opts.both_paths;
    const ConvergenceResult result = run_convergence_triangles(cfg);
    write_csv(result.records, tri_opts.out);
    std::printf("slope=%.17g intercept=%.17g r2=%.17g n_points=%d\n", result.regression.slope,
                result.regression.intercept, result.regression.r2, result.regression.n_points);
  });

  struct {
    std::string n_list = "10,18,32,56,100";
    int n_max = 100;
    int reps = 5;
    int cloud_size = 250;
    double radius_fraction = 0.28;
    std::string p = "2";
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
  } torus_conv_opts;
  auto* exp_torus = experiment->add_subcommand("convergence-torus", "rate of the averaged torus H1 diagram");
  exp_torus->add_option("--n-list", torus_conv_opts.n_list, "comma-separated sample sizes (<= n-max)");
  exp_torus->add_option("--n-max", torus_conv_opts.n_max, "largest sample size; proxy uses 2*n-max");
  exp_torus->add_option("--reps", torus_conv_opts.reps, "repetitions")->check(CLI::PositiveNumber);
  exp_torus->add_option("--cloud-size", torus_conv_opts.cloud_size, "points per torus cloud");
  exp_torus->add_option("--radius-fraction", torus_conv_opts.radius_fraction, "filtration cutoff fraction");
  exp_torus->add_option("--p", torus_conv_opts.p, "transport exponent (finite)");
  exp_torus->add_option("--seed", torus_conv_opts.seed, "master seed");
  exp_torus->add_option("--threads", torus_conv_opts.threads, "worker threads (0: logical cores)");
  exp_torus->add_option("--out", torus_conv_opts.out, "output CSV")->required();
  exp_torus->callback([&] {
    TorusConvergenceConfig cfg;
    cfg.n_list = parse_int_list(torus_conv_opts.n_list);
    cfg.n_max = torus_conv_opts.n_max;
    cfg.reps = torus_conv_opts.reps;
    cfg.cloud_size = torus_conv_opts.cloud_size;
    cfg.radius_fraction = torus_conv_opts.radius_fraction;
    cfg.p = parse_p(torus_conv_opts.p);
    cfg.seed = torus_conv_opts.seed;
    cfg.threads = torus_conv_opts.threads;
    const ConvergenceResult result = run_convergence_torus(cfg);
    write_csv(result.records, torus_conv_opts.out);
    std::printf("slope=%.17g intercept=%.17g r2=%.17g n_points=%d\n", result.regression.slope,
                result.regression.intercept, result.regression.r2, result.regression.n_points);
  });

  struct {
    std::string k_list = "1,2,3,4,5";
    int n = 60;
    int batch_size = 10;
    int reps = 10;
    double mean_points = 300.0;
    double epsilon = 0.1;
    double radius_fraction = 0.28;
    bool split_batches = false;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
  } quant_exp_opts;
  auto* exp_quant = experiment->add_subcommand("quantization", "codebook method comparison on torus diagrams");
  exp_quant->add_option("--k-list", quant_exp_opts.k_list, "comma-separated codebook sizes");
  exp_quant->add_option("--n", quant_exp_opts.n, "diagrams per repetition")->check(CLI::PositiveNumber);
  exp_quant->add_option("--batch-size", quant_exp_opts.batch_size, "diagrams per online update");
  exp_quant->add_option("--reps", quant_exp_opts.reps, "repetitions")->check(CLI::PositiveNumber);
  exp_quant->add_option("--mean-points", quant_exp_opts.mean_points, "Poisson mean cloud size");
  exp_quant->add_option("--epsilon", quant_exp_opts.epsilon, "torus radii jitter");
  exp_quant->add_option("--radius-fraction", quant_exp_opts.radius_fraction, "filtration cutoff fraction");
  exp_quant->add_flag("--split-batches", quant_exp_opts.split_batches, "feed each batch's halves separately");
  exp_quant->add_option("--seed", quant_exp_opts.seed, "master seed");
  exp_quant->add_option("--threads", quant_exp_opts.threads, "worker threads (0: logical cores)");
  exp_quant->add_option("--out", quant_exp_opts.out, "output CSV (a sibling .inf.csv holds the p=inf values)")
      ->required();
  exp_quant->callback([&] {
    QuantizationConfig cfg;
    cfg.k_list = parse_int_list(quant_exp_opts.k_list);
    cfg.n = quant_exp_opts.n;
    cfg.batch_size = quant_exp_opts.batch_size;
    cfg.reps = quant_exp_opts.reps;
    cfg.torus.mean_points = quant_exp_opts.mean_points;
    cfg.torus.epsilon = quant_exp_opts.epsilon;
    cfg.radius_fraction = quant_exp_opts.radius_fraction;
    cfg.split_batches = quant_exp_opts.split_batches;
    cfg.seed = quant_exp_opts.seed;
    cfg.threads = quant_exp_opts.threads;
    const QuantizationResult result = run_quantization_comparison(cfg);
    fs::path out(quant_exp_opts.out);
    write_csv(result.records_d2, out);
    fs::path out_inf = out;
    out_inf.replace_extension(".inf.csv");
    write_csv(result.records_dinf, out_inf);
    std::printf("wrote %s and %s\n", out.string().c_str(), out_inf.string().c_str());
  });

  // --- plot ----------------------------------------------------------------
  struct {
    std::string csv, kind = "loglog", out;
  } plot_opts;
  auto* plot = app.add_subcommand("plot", "render an experiment CSV to SVG");
  plot->add_option("--csv", plot_opts.csv, "input CSV")->required();
  plot->add_option("--kind", plot_opts.kind, "loglog | bars")->check(CLI::IsMember({"loglog", "bars"}));
  plot->add_option("--out", plot_opts.out, "output SVG")->required();
  plot->callback([&] { plot_csv(plot_opts.csv, plot_opts.kind, plot_opts.out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
