#ifndef EPDQ_HOMOLOGY_HPP
#define EPDQ_HOMOLOGY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "epdq/measures.hpp"

namespace epdq {

/// Point of a cloud in R^2 or R^3 (z = 0 for planar clouds).
struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double point_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Simplex of dimension <= 2 with its ball-cover entry scale: 0 for vertices,
/// half the length for edges, the min-enclosing-ball radius for triangles.
struct Simplex {
  std::array<std::int32_t, 3> vertices{-1, -1, -1};  // sorted, unused = -1
  std::int8_t dim = 0;
  double value = 0.0;
};

/// Simplices sorted by (value, dimension, lexicographic vertices); a valid
/// filtration order (faces precede cofaces).
struct Filtration {
  std::vector<Simplex> simplices;
  double max_radius = 0.0;
  std::size_t n_vertices = 0;
};

namespace detail {

/// Radius of the smallest ball enclosing a triangle: circumradius when the
/// triangle is acute, half the longest edge otherwise.
inline double triangle_enclosing_radius(const Point3& a, const Point3& b, const Point3& c) {
  const double ab = point_distance(a, b);
  const double ac = point_distance(a, c);
  const double bc = point_distance(b, c);
  double s1 = ab, s2 = ac, s3 = bc;  // s3 = longest
  if (s1 > s3) std::swap(s1, s3);
  if (s2 > s3) std::swap(s2, s3);
  if (s1 * s1 + s2 * s2 <= s3 * s3) return s3 / 2.0;
  // Acute: circumradius = abc / (4 * area), area from the cross product.
  const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
  const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
  const double cx = uy * vz - uz * vy;
  const double cy = uz * vx - ux * vz;
  const double cz = ux * vy - uy * vx;
  const double area2 = std::sqrt(cx * cx + cy * cy + cz * cz);  // twice the area
  if (area2 <= 0.0) return s3 / 2.0;                            // collinear
  const double r = (ab * ac * bc) / (2.0 * area2);
  return std::max(r, s3 / 2.0);  // enclosing-ball radius never below the edge values
}

inline bool simplex_order(const Simplex& a, const Simplex& b) {
  if (a.value != b.value) return a.value < b.value;
  if (a.dim != b.dim) return a.dim < b.dim;
  return a.vertices < b.vertices;
}

}  // namespace detail

/// Builds the ball-cover filtration of a point cloud with all simplices of
/// dimension <= 2 entering at scale <= max_radius.
inline Filtration cech_filtration(const std::vector<Point3>& points, double max_radius) {
  if (points.empty()) throw std::invalid_argument("cech_filtration: empty point cloud");
  if (!(max_radius > 0.0)) throw std::invalid_argument("cech_filtration: max_radius must be positive");
  for (const Point3& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("cech_filtration: non-finite coordinates");

  const std::int32_t n = static_cast<std::int32_t>(points.size());
  Filtration f;
  f.max_radius = max_radius;
  f.n_vertices = points.size();
  for (std::int32_t i = 0; i < n; ++i) f.simplices.push_back({{i, -1, -1}, 0, 0.0});

  // Edges within reach, with neighbor lists for the triangle pass.
  std::vector<std::vector<std::int32_t>> neighbors(n);  // j > i only
  std::vector<std::vector<double>> edge_value(n);
  for (std::int32_t i = 0; i < n; ++i) {
    for (std::int32_t j = i + 1; j < n; ++j) {
      const double v = point_distance(points[i], points[j]) / 2.0;
      if (v <= max_radius) {
        f.simplices.push_back({{i, j, -1}, 1, v});
        neighbors[i].push_back(j);
        edge_value[i].push_back(v);
      }
    }
  }
  for (std::int32_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < neighbors[i].size(); ++a) {
      const std::int32_t j = neighbors[i][a];
      for (std::size_t b = a + 1; b < neighbors[i].size(); ++b) {
        const std::int32_t k = neighbors[i][b];
        // Edge (j,k) must itself be within reach.
        const auto it = std::lower_bound(neighbors[j].begin(), neighbors[j].end(), k);
        if (it == neighbors[j].end() || *it != k) continue;
        double v = detail::triangle_enclosing_radius(points[i], points[j], points[k]);
        v = std::max({v, edge_value[i][a], edge_value[i][b], edge_value[j][static_cast<std::size_t>(it - neighbors[j].begin())]});
        if (v <= max_radius) f.simplices.push_back({{i, j, k}, 2, v});
      }
    }
  }
  std::sort(f.simplices.begin(), f.simplices.end(), detail::simplex_order);
  return f;
}

struct PersistencePairsResult {
  PersistenceMeasure diagram;
  std::size_t dropped_infinite = 0;
  std::size_t dropped_zero = 0;
};

namespace detail {

/// Column-by-column reduction of one boundary dimension over Z/2. The
/// working column is a sorted vector; adding a stored column toggles its few
/// entries in place (stored columns stay short here, the working column does
/// not), and the shared pivot cancels by a pop.
class BoundaryReducer {
public:
  explicit BoundaryReducer(std::size_t n_rows) : pivot_owner_(n_rows, -1) {}

  /// Reduces one column (entries distinct); returns the pairing row, or -1
  /// if the column died.
  std::int64_t reduce(std::vector<std::int32_t> column) {
    std::sort(column.begin(), column.end());
    working_ = std::move(column);
    while (!working_.empty()) {
      const std::int32_t low = working_.back();
      const std::int64_t other = pivot_owner_[low];
      if (other < 0) {
        pivot_owner_[low] = static_cast<std::int64_t>(stored_.size());
        stored_.push_back(working_);
        return low;
      }
      const auto& add = stored_[static_cast<std::size_t>(other)];
      working_.pop_back();  // the stored column's pivot cancels low
      for (std::size_t i = add.size() - 1; i-- > 0;) toggle(add[i]);
    }
    return -1;
  }

private:
  void toggle(std::int32_t row) {
    const auto it = std::lower_bound(working_.begin(), working_.end(), row);
    if (it != working_.end() && *it == row)
      working_.erase(it);
    else
      working_.insert(it, row);
  }

  std::vector<std::int64_t> pivot_owner_;
  std::vector<std::vector<std::int32_t>> stored_;
  std::vector<std::int32_t> working_;
};

}  // namespace detail

/// Finite persistence pairs of the filtration in dimension 0 or 1, by Z/2
/// column reduction with clearing, run on the coboundary matrix (columns in
/// reverse filtration order, pivot = oldest cofacet). The pairing is the
/// standard boundary-reduction pairing by duality, at a fraction of the
/// columns: edges paired by the vertex pass are cleared from the edge pass,
/// and essential classes fall out of each pass directly. Zero-persistence
/// pairs and infinite bars are dropped, with counts reported.
inline PersistencePairsResult persistence_pairs(const Filtration& f, int dim) {
  if (dim != 0 && dim != 1) throw std::invalid_argument("persistence_pairs: dim must be 0 or 1");

  // Positions of simplices within their own dimension, in filtration order.
  std::vector<std::int32_t> rank(f.simplices.size());
  std::array<std::vector<std::int32_t>, 3> by_dim;  // filtration indices per dimension
  for (std::size_t i = 0; i < f.simplices.size(); ++i) {
    rank[i] = static_cast<std::int32_t>(by_dim[f.simplices[i].dim].size());
    by_dim[f.simplices[i].dim].push_back(static_cast<std::int32_t>(i));
  }
  const std::int32_t n_vertices = static_cast<std::int32_t>(by_dim[0].size());
  const std::int32_t n_edges = static_cast<std::int32_t>(by_dim[1].size());
  const std::int32_t n_triangles = static_cast<std::int32_t>(by_dim[2].size());

  std::vector<Atom> atoms;
  std::size_t dropped_infinite = 0, dropped_zero = 0;
  auto emit = [&](double birth, double death) {
    if (death > birth)
      atoms.push_back({{birth, death}, 1.0});
    else
      ++dropped_zero;
  };

  // Vertex pass: cofacet rows are edges, encoded reversed so that the
  // reducer's max pivot is the oldest edge. Always needed: it yields the H0
  // pairs and the clearing set for the edge pass.
  std::vector<std::vector<std::int32_t>> vertex_cofacets(static_cast<std::size_t>(n_vertices));
  for (std::int32_t e = 0; e < n_edges; ++e) {
    const auto& v = f.simplices[by_dim[1][e]].vertices;
    vertex_cofacets[v[0]].push_back(n_edges - 1 - e);
    vertex_cofacets[v[1]].push_back(n_edges - 1 - e);
  }
  std::vector<char> edge_cleared(static_cast<std::size_t>(n_edges), 0);
  {
    detail::BoundaryReducer reducer(static_cast<std::size_t>(n_edges));
    for (std::int32_t v = n_vertices; v-- > 0;) {
      const std::int64_t low = reducer.reduce(vertex_cofacets[v]);
      if (low < 0) {
        ++dropped_infinite;  // essential component (only reported for dim 0)
        continue;
      }
      const std::int32_t e = n_edges - 1 - static_cast<std::int32_t>(low);
      edge_cleared[e] = 1;
      if (dim == 0) emit(f.simplices[by_dim[0][v]].value, f.simplices[by_dim[1][e]].value);
    }
  }
  if (dim == 0) {
    PersistencePairsResult result;
    result.diagram = PersistenceMeasure(std::move(atoms));
    result.dropped_infinite = dropped_infinite;
    result.dropped_zero = dropped_zero;
    return result;
  }
  dropped_infinite = 0;

  // Edge pass: cofacet rows are triangles; edges paired above reduce to zero
  // and are skipped. Pairs are the H1 (birth, death) pairs; edge columns that
  // die here are essential loops.
  std::vector<std::vector<std::int32_t>> edge_cofacets(static_cast<std::size_t>(n_edges));
  {
    // Edge rank lookup by vertex pair.
    std::vector<std::pair<std::int64_t, std::int32_t>> edge_key;
    edge_key.reserve(static_cast<std::size_t>(n_edges));
    const std::int64_t stride = static_cast<std::int64_t>(f.n_vertices) + 1;
    for (std::int32_t e = 0; e < n_edges; ++e) {
      const auto& v = f.simplices[by_dim[1][e]].vertices;
      edge_key.push_back({v[0] * stride + v[1], e});
    }
    std::sort(edge_key.begin(), edge_key.end());
    auto edge_rank = [&](std::int32_t a, std::int32_t b) {
      return std::lower_bound(edge_key.begin(), edge_key.end(),
                              std::pair<std::int64_t, std::int32_t>{a * stride + b, -1})
          ->second;
    };
    for (std::int32_t t = 0; t < n_triangles; ++t) {
      const auto& v = f.simplices[by_dim[2][t]].vertices;
      const std::int32_t row = n_triangles - 1 - t;
      edge_cofacets[edge_rank(v[0], v[1])].push_back(row);
      edge_cofacets[edge_rank(v[0], v[2])].push_back(row);
      edge_cofacets[edge_rank(v[1], v[2])].push_back(row);
    }
  }
  {
    detail::BoundaryReducer reducer(static_cast<std::size_t>(n_triangles));
    for (std::int32_t e = n_edges; e-- > 0;) {
      if (edge_cleared[e]) continue;
      const std::int64_t low = reducer.reduce(edge_cofacets[e]);
      if (low < 0) {
        ++dropped_infinite;  // essential loop
        continue;
      }
      const std::int32_t t = n_triangles - 1 - static_cast<std::int32_t>(low);
      emit(f.simplices[by_dim[1][e]].value, f.simplices[by_dim[2][t]].value);
    }
  }

  PersistencePairsResult result;
  result.diagram = PersistenceMeasure(std::move(atoms));
  result.dropped_infinite = dropped_infinite;
  result.dropped_zero = dropped_zero;
  return result;
}

// ---------------------------------------------------------------------------
// Point cloud text format: one point per line, 2 or 3 whitespace-separated
// coordinates, '#' comments.
// ---------------------------------------------------------------------------

inline std::vector<Point3> parse_point_cloud(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<Point3> points;
  std::string line;
  std::size_t lineno = 0;
  int columns = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> coords;
    double v;
    while (ls >> v) coords.push_back(v);
    if (coords.empty()) continue;
    if (coords.size() != 2 && coords.size() != 3)
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected 2 or 3 coordinates");
    if (columns == 0) columns = static_cast<int>(coords.size());
    if (static_cast<int>(coords.size()) != columns)
      throw DataError(origin + ":" + std::to_string(lineno) + ": inconsistent coordinate count");
    points.push_back({coords[0], coords[1], coords.size() == 3 ? coords[2] : 0.0});
  }
  return points;
}

inline std::vector<Point3> load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_point_cloud(in, path.string());
}

inline void save_point_cloud(const std::vector<Point3>& points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[128];
  for (const Point3& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << buf;
  }
}

inline double cloud_diameter(const std::vector<Point3>& points) {
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) d = std::max(d, point_distance(points[i], points[j]));
  return d;
}

}  // namespace epdq

#endif  // EPDQ_HOMOLOGY_HPP
