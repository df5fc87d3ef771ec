#ifndef EPDQ_MEASURES_HPP
#define EPDQ_MEASURES_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "epdq/log.hpp"

namespace epdq {

inline constexpr double kSqrt2 = 1.4142135623730951;

/// A point of the open half-plane {(birth, death) : death > birth}.
struct HalfPlanePoint {
  double birth = 0.0;
  double death = 0.0;

  friend bool operator==(const HalfPlanePoint&, const HalfPlanePoint&) = default;
};

/// Euclidean distance from x to the diagonal {(t,t)}.
inline double persistence(const HalfPlanePoint& x) { return (x.death - x.birth) / kSqrt2; }

inline double distance(const HalfPlanePoint& a, const HalfPlanePoint& b) {
  return std::hypot(a.birth - b.birth, a.death - b.death);
}

inline bool above_diagonal(const HalfPlanePoint& x) { return x.death > x.birth; }

/// Coordinates in the rotated frame (position along the diagonal, distance to
/// it). Several geometric routines are simpler there.
struct DiagonalCoords {
  double along = 0.0;
  double height = 0.0;
};

inline DiagonalCoords to_diagonal_coords(const HalfPlanePoint& x) {
  return {(x.birth + x.death) / kSqrt2, (x.death - x.birth) / kSqrt2};
}

inline HalfPlanePoint from_diagonal_coords(const DiagonalCoords& c) {
  return {(c.along - c.height) / kSqrt2, (c.along + c.height) / kSqrt2};
}

struct Atom {
  HalfPlanePoint point;
  double mass = 1.0;
};

/// A finite weighted point set on the open half-plane. Persistence diagrams
/// are the unit-mass special case; averaged diagrams carry fractional masses.
/// Immutable after construction.
class PersistenceMeasure {
public:
  PersistenceMeasure() = default;

  explicit PersistenceMeasure(std::vector<Atom> atoms) {
    atoms_.reserve(atoms.size());
    for (const Atom& a : atoms) {
      if (!std::isfinite(a.point.birth) || !std::isfinite(a.point.death))
        throw std::invalid_argument("PersistenceMeasure: non-finite coordinates");
      if (!(a.point.death > a.point.birth))
        throw std::invalid_argument("PersistenceMeasure: atom not above the diagonal");
      if (!(a.mass >= 0.0) || !std::isfinite(a.mass))
        throw std::invalid_argument("PersistenceMeasure: negative or non-finite mass");
      if (a.mass > 0.0) atoms_.push_back(a);
    }
  }

  static PersistenceMeasure from_points(const std::vector<HalfPlanePoint>& points, double mass = 1.0) {
    std::vector<Atom> atoms;
    atoms.reserve(points.size());
    for (const auto& p : points) atoms.push_back({p, mass});
    return PersistenceMeasure(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  double total_mass() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.mass;
    return m;
  }

  /// All masses multiplied by alpha > 0.
  PersistenceMeasure scaled(double alpha) const {
    if (!(alpha > 0.0)) throw std::invalid_argument("scaled: alpha must be positive");
    std::vector<Atom> atoms = atoms_;
    for (Atom& a : atoms) a.mass *= alpha;
    return PersistenceMeasure(std::move(atoms));
  }

  /// Atoms at exactly equal coordinates combined, sorted by (birth, death).
  PersistenceMeasure merged() const {
    std::vector<Atom> atoms = atoms_;
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
      return a.point.birth != b.point.birth ? a.point.birth < b.point.birth : a.point.death < b.point.death;
    });
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (const Atom& a : atoms) {
      if (!out.empty() && out.back().point == a.point)
        out.back().mass += a.mass;
      else
        out.push_back(a);
    }
    return PersistenceMeasure(std::move(out));
  }

private:
  std::vector<Atom> atoms_;
};

/// Compares two measures atom-by-atom after merging. Intended for tests and
/// round-trip checks; atoms must line up one-to-one within tol.
inline bool measures_close(const PersistenceMeasure& a, const PersistenceMeasure& b, double tol) {
  const auto ma = a.merged().atoms();
  const auto mb = b.merged().atoms();
  if (ma.size() != mb.size()) return false;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    if (std::abs(ma[i].point.birth - mb[i].point.birth) > tol) return false;
    if (std::abs(ma[i].point.death - mb[i].point.death) > tol) return false;
    if (std::abs(ma[i].mass - mb[i].mass) > tol) return false;
  }
  return true;
}

/// Pers_p: integral of persistence^p. For p = 0 this is the total mass.
inline double total_persistence(const PersistenceMeasure& mu, double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("total_persistence: p must be finite and >= 0");
  double sum = 0.0;
  for (const Atom& a : mu.atoms()) sum += a.mass * std::pow(persistence(a.point), p);
  return sum;
}

/// Average of n diagrams: atom union with masses divided by n, equal
/// coordinates merged.
inline PersistenceMeasure empirical_epd(const std::vector<PersistenceMeasure>& diagrams) {
  if (diagrams.empty()) throw std::invalid_argument("empirical_epd: no diagrams");
  const double inv_n = 1.0 / static_cast<double>(diagrams.size());
  std::vector<Atom> atoms;
  for (const PersistenceMeasure& mu : diagrams)
    for (const Atom& a : mu.atoms()) atoms.push_back({a.point, a.mass * inv_n});
  return PersistenceMeasure(std::move(atoms)).merged();
}

// ---------------------------------------------------------------------------
// Grid histograms
// ---------------------------------------------------------------------------

struct GridSpec {
  double x_lo = 0.0, x_hi = 1.0;
  double y_lo = 0.0, y_hi = 1.0;
  int nx = 1, ny = 1;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

  void validate() const {
    if (!(x_hi > x_lo) || !(y_hi > y_lo) || nx < 1 || ny < 1)
      throw std::invalid_argument("GridSpec: degenerate window or bins");
  }
  double cell_width() const { return (x_hi - x_lo) / nx; }
  double cell_height() const { return (y_hi - y_lo) / ny; }

  /// Bin index along x with half-open cells [lo, hi), last cell closed.
  /// Returns -1 when outside the window.
  int x_index(double x) const {
    if (x < x_lo || x > x_hi) return -1;
    if (x == x_hi) return nx - 1;
    int i = static_cast<int>((x - x_lo) / cell_width());
    return std::min(i, nx - 1);
  }
  int y_index(double y) const {
    if (y < y_lo || y > y_hi) return -1;
    if (y == y_hi) return ny - 1;
    int i = static_cast<int>((y - y_lo) / cell_height());
    return std::min(i, ny - 1);
  }
};

/// Masses binned on a rectangular grid. Mass never sits at a cell whose
/// center is on or below the diagonal: such mass is carried by the next cell
/// up in the same column, so that atomizing the histogram always yields valid
/// half-plane points.
class GridHistogram {
public:
  GridHistogram() = default;
  explicit GridHistogram(const GridSpec& spec) : spec_(spec), cells_(static_cast<std::size_t>(spec.nx) * spec.ny, 0.0) {
    spec.validate();
  }

  const GridSpec& spec() const { return spec_; }
  double cell(int ix, int iy) const { return cells_[index(ix, iy)]; }
  const std::vector<double>& cells() const { return cells_; }

  HalfPlanePoint cell_center(int ix, int iy) const {
    return {spec_.x_lo + (ix + 0.5) * spec_.cell_width(), spec_.y_lo + (iy + 0.5) * spec_.cell_height()};
  }

  double total_mass() const {
    double m = 0.0;
    for (double c : cells_) m += c;
    return m;
  }

  /// Adds mass to cell (ix, iy), walking up the column if the cell center is
  /// not strictly above the diagonal.
  void add_mass(int ix, int iy, double mass) {
    if (mass == 0.0) return;
    if (mass < 0.0) throw std::invalid_argument("GridHistogram: negative mass");
    int j = iy;
    while (j < spec_.ny && !above_diagonal(cell_center(ix, j))) ++j;
    if (j >= spec_.ny)
      throw DataError("GridHistogram: no cell center above the diagonal in this column");
    cells_[index(ix, j)] += mass;
  }

  /// Cell centers with their masses, zero cells skipped.
  PersistenceMeasure to_measure() const {
    std::vector<Atom> atoms;
    for (int iy = 0; iy < spec_.ny; ++iy)
      for (int ix = 0; ix < spec_.nx; ++ix)
        if (cells_[index(ix, iy)] > 0.0) atoms.push_back({cell_center(ix, iy), cells_[index(ix, iy)]});
    return PersistenceMeasure(std::move(atoms));
  }

private:
  std::size_t index(int ix, int iy) const {
    if (ix < 0 || ix >= spec_.nx || iy < 0 || iy >= spec_.ny) throw std::out_of_range("GridHistogram: cell index");
    return static_cast<std::size_t>(iy) * spec_.nx + ix;
  }

  GridSpec spec_;
  std::vector<double> cells_;
};

/// Bins a measure on a grid. Atoms outside the window are an error unless
/// clip is set, in which case they are dropped with a warning.
inline GridHistogram to_histogram(const PersistenceMeasure& mu, const GridSpec& spec, bool clip = false) {
  GridHistogram hist(spec);
  std::size_t clipped = 0;
  for (const Atom& a : mu.atoms()) {
    const int ix = spec.x_index(a.point.birth);
    const int iy = spec.y_index(a.point.death);
    if (ix < 0 || iy < 0) {
      if (!clip) throw DataError("to_histogram: atom outside the grid window");
      ++clipped;
      continue;
    }
    hist.add_mass(ix, iy, a.mass);
  }
  if (clipped > 0) log(LogLevel::warn, "to_histogram: clipped %zu atom(s) outside the window", clipped);
  return hist;
}

// ---------------------------------------------------------------------------
// .dgm file format: one atom per line, "birth death [mass]", '#' comments.
// ---------------------------------------------------------------------------

struct DgmParseResult {
  PersistenceMeasure measure;
  std::size_t dropped_infinite = 0;
};

inline DgmParseResult parse_dgm(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<Atom> atoms;
  std::size_t dropped_infinite = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    // Tokenize by hand: stream extraction rejects "inf", which a serialized
    // infinite bar legitimately contains.
    std::istringstream ls(line);
    std::vector<double> fields;
    std::string token;
    while (ls >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size())
        throw DataError(origin + ":" + std::to_string(lineno) + ": bad number '" + token + "'");
      fields.push_back(v);
    }
    if (fields.empty()) continue;  // blank line
    if (fields.size() < 2) throw DataError(origin + ":" + std::to_string(lineno) + ": expected 'birth death [mass]'");
    if (fields.size() > 3) throw DataError(origin + ":" + std::to_string(lineno) + ": trailing tokens");
    const double birth = fields[0];
    const double death = fields[1];
    const double mass = fields.size() == 3 ? fields[2] : 1.0;
    if (!std::isfinite(birth) || !std::isfinite(death)) {
      ++dropped_infinite;
      continue;
    }
    if (!(death > birth)) throw DataError(origin + ":" + std::to_string(lineno) + ": death <= birth");
    if (!(mass >= 0.0) || !std::isfinite(mass)) throw DataError(origin + ":" + std::to_string(lineno) + ": bad mass");
    atoms.push_back({{birth, death}, mass});
  }
  if (dropped_infinite > 0)
    log(LogLevel::warn, "%s: dropped %zu infinite-persistence point(s)", origin.c_str(), dropped_infinite);
  return {PersistenceMeasure(std::move(atoms)), dropped_infinite};
}

inline DgmParseResult load_dgm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_dgm(in, path.string());
}

inline void serialize_dgm(const PersistenceMeasure& mu, std::ostream& out) {
  char buf[128];
  for (const Atom& a : mu.atoms()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", a.point.birth, a.point.death, a.mass);
    out << buf;
  }
}

inline void save_dgm(const PersistenceMeasure& mu, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  serialize_dgm(mu, out);
}

/// Loads every *.dgm file of a directory in filename order.
inline std::vector<PersistenceMeasure> load_dgm_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".dgm") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<PersistenceMeasure> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_dgm(f).measure);
  return out;
}

}  // namespace epdq

#endif  // EPDQ_MEASURES_HPP
