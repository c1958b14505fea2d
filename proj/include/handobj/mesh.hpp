#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include "handobj/error.hpp"

namespace handobj {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Faces with area below this (m^2) are rejected as degenerate.
inline constexpr double kDegenerateArea = 1e-12;

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

/// Indexed triangle mesh. Counter-clockwise winding gives the outward normal.
/// Validated on construction and immutable afterwards.
class TriMesh {
 public:
  TriMesh() = default;

  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    validate();
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  bool empty() const { return faces_.empty(); }

  const Vec3& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }

  Vec3 face_normal(std::size_t f) const {
    const auto& [a, b, c] = faces_[f];
    return (vertex(b) - vertex(a)).cross(vertex(c) - vertex(a)).normalized();
  }

  double face_area(std::size_t f) const {
    const auto& [a, b, c] = faces_[f];
    return triangle_area(vertex(a), vertex(b), vertex(c));
  }

  /// Same connectivity, new positions.
  TriMesh with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != vertices_.size()) {
      throw Error(ErrorKind::InvalidArgument, "with_vertices: vertex count mismatch");
    }
    return TriMesh(std::move(vertices), faces_);
  }

  template <typename F>
  TriMesh mapped(F&& fn) const {
    std::vector<Vec3> out;
    out.reserve(vertices_.size());
    for (const auto& v : vertices_) out.push_back(fn(v));
    return TriMesh(std::move(out), faces_);
  }

  TriMesh translated(const Vec3& t) const {
    return mapped([&](const Vec3& v) { return Vec3(v + t); });
  }

  TriMesh scaled(double s, const Vec3& about = Vec3::Zero()) const {
    return mapped([&](const Vec3& v) { return Vec3(about + s * (v - about)); });
  }

 private:
  void validate() const {
    const auto n = static_cast<long long>(vertices_.size());
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const auto& face = faces_[f];
      for (int idx : face) {
        if (idx < 0 || idx >= n) {
          throw Error(ErrorKind::InvalidArgument,
                      "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                          " but mesh has " + std::to_string(n) + " vertices");
        }
      }
      if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
        throw Error(ErrorKind::Geometry, "face " + std::to_string(f) + " repeats a vertex index");
      }
      if (face_area(f) < kDegenerateArea) {
        throw Error(ErrorKind::Geometry, "face " + std::to_string(f) + " is degenerate (zero area)");
      }
    }
    for (const auto& v : vertices_) {
      if (!v.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite vertex coordinate");
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
};

/// Sampled surface points with optional unit normals (empty when absent).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  static PointCloud from_vertices(const TriMesh& mesh) { return PointCloud{mesh.vertices(), {}}; }
};

/// Maps world coordinates to the centroid-centred, unit-radius frame.
struct NormalizationTransform {
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& v) const { return (v - translation) / scale; }
  Vec3 invert(const Vec3& v) const { return v * scale + translation; }
};

// ---------------------------------------------------------------------------
// Connectivity

/// Unique undirected edges as (lo, hi) pairs, sorted.
inline std::vector<std::pair<int, int>> unique_edges(const TriMesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.num_faces() * 3);
  for (const auto& f : mesh.faces()) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// Sorted edge-adjacent neighbours of every vertex.
inline std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<int>> nbrs(mesh.num_vertices());
  for (const auto& [a, b] : unique_edges(mesh)) {
    nbrs[static_cast<std::size_t>(a)].push_back(b);
    nbrs[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& n : nbrs) std::sort(n.begin(), n.end());
  return nbrs;
}

struct EdgeLength {
  int a;
  int b;
  double length;
};

inline std::vector<EdgeLength> edge_lengths(const TriMesh& mesh) {
  std::vector<EdgeLength> out;
  for (const auto& [a, b] : unique_edges(mesh)) {
    out.push_back({a, b, (mesh.vertex(a) - mesh.vertex(b)).norm()});
  }
  return out;
}

struct WatertightReport {
  bool watertight = false;
  std::size_t boundary_edges = 0;     // undirected edges with one incident face
  std::size_t nonmanifold_edges = 0;  // undirected edges with more than two incident faces
  std::size_t misoriented_edges = 0;  // two faces traverse the edge in the same direction
};

inline WatertightReport watertight_report(const TriMesh& mesh) {
  // key: undirected edge; value: (count a->b with a<b, count b->a)
  std::map<std::pair<int, int>, std::pair<int, int>> uses;
  for (const auto& f : mesh.faces()) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      auto& entry = uses[{std::min(a, b), std::max(a, b)}];
      (a < b ? entry.first : entry.second) += 1;
    }
  }
  WatertightReport report;
  for (const auto& [edge, count] : uses) {
    const int total = count.first + count.second;
    if (total == 1) {
      ++report.boundary_edges;
    } else if (total > 2) {
      ++report.nonmanifold_edges;
    } else if (count.first != 1) {
      ++report.misoriented_edges;
    }
  }
  report.watertight = !mesh.empty() && report.boundary_edges == 0 &&
                      report.nonmanifold_edges == 0 && report.misoriented_edges == 0;
  return report;
}

/// True iff every edge is shared by exactly two faces with opposite orientation.
inline bool is_watertight(const TriMesh& mesh) { return watertight_report(mesh).watertight; }

inline std::string describe(const WatertightReport& r) {
  return "boundary edges: " + std::to_string(r.boundary_edges) +
         ", non-manifold edges: " + std::to_string(r.nonmanifold_edges) +
         ", misoriented edges: " + std::to_string(r.misoriented_edges);
}

/// Signed enclosed volume (divergence theorem); positive for outward winding.
inline double signed_volume(const TriMesh& mesh) {
  double vol = 0.0;
  for (const auto& [a, b, c] : mesh.faces()) {
    vol += mesh.vertex(a).dot(mesh.vertex(b).cross(mesh.vertex(c)));
  }
  return vol / 6.0;
}

/// Closes every boundary loop with a fan around the loop's centroid.
/// Requires simple boundary loops (one outgoing boundary edge per vertex).
inline TriMesh close_boundaries(const TriMesh& mesh) {
  const auto report = watertight_report(mesh);
  if (report.nonmanifold_edges > 0 || report.misoriented_edges > 0) {
    throw Error(ErrorKind::Geometry, "cannot close boundaries of a non-manifold mesh (" + describe(report) + ")");
  }
  if (report.watertight) return mesh;

  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces()) {
    for (int k = 0; k < 3; ++k) directed[{f[k], f[(k + 1) % 3]}] += 1;
  }
  std::map<int, int> next;
  for (const auto& [e, count] : directed) {
    if (directed.count({e.second, e.first}) == 0) {
      if (!next.emplace(e.first, e.second).second) {
        throw Error(ErrorKind::Geometry, "boundary loop through vertex " + std::to_string(e.first) + " is not simple");
      }
    }
  }

  std::vector<Vec3> vertices = mesh.vertices();
  std::vector<Face> faces = mesh.faces();
  std::map<int, bool> visited;
  for (const auto& [start, unused] : next) {
    if (visited[start]) continue;
    std::vector<int> loop;
    int v = start;
    while (!visited[v]) {
      visited[v] = true;
      loop.push_back(v);
      auto it = next.find(v);
      if (it == next.end()) throw Error(ErrorKind::Geometry, "open boundary chain at vertex " + std::to_string(v));
      v = it->second;
    }
    if (v != start || loop.size() < 3) {
      throw Error(ErrorKind::Geometry, "boundary loop through vertex " + std::to_string(start) + " is not closed");
    }
    Vec3 centroid = Vec3::Zero();
    for (int i : loop) centroid += mesh.vertex(i);
    centroid /= static_cast<double>(loop.size());
    const int c = static_cast<int>(vertices.size());
    vertices.push_back(centroid);
    for (std::size_t k = 0; k < loop.size(); ++k) {
      faces.push_back({loop[(k + 1) % loop.size()], loop[k], c});
    }
  }
  TriMesh closed(std::move(vertices), std::move(faces));
  if (!is_watertight(closed)) {
    throw Error(ErrorKind::Geometry, "boundary closing did not produce a watertight mesh");
  }
  // A flat closure (e.g. a single open triangle) encloses nothing.
  const Vec3 extent = [&] {
    Vec3 lo = closed.vertex(0), hi = closed.vertex(0);
    for (const auto& p : closed.vertices()) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return Vec3(hi - lo);
  }();
  const double diag = extent.norm();
  if (std::abs(signed_volume(closed)) <= 1e-9 * diag * diag * diag) {
    throw Error(ErrorKind::Geometry, "boundary closing produced a flat (zero-volume) surface");
  }
  return closed;
}

// ---------------------------------------------------------------------------
// Construction

/// Unit icosphere: the regular icosahedron subdivided `level` times, with new
/// vertices projected back to the unit sphere.
inline TriMesh icosphere(int level) {
  if (level < 0 || level > 7) {
    throw Error(ErrorKind::InvalidArgument, "icosphere level must be in [0, 7], got " + std::to_string(level));
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const auto& [a, b, c] : f) {
      const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Area-weighted uniform surface samples; normals are the face normals.
inline PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw Error(ErrorKind::Geometry, "sample_surface: mesh has no faces");
  std::vector<double> cdf(mesh.num_faces());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = unif(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const auto f = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    const double r1 = std::sqrt(unif(rng));
    const double r2 = unif(rng);
    const auto& [a, b, c] = mesh.faces()[f];
    cloud.points.push_back((1.0 - r1) * mesh.vertex(a) + r1 * (1.0 - r2) * mesh.vertex(b) +
                           r1 * r2 * mesh.vertex(c));
    cloud.normals.push_back(mesh.face_normal(f));
  }
  return cloud;
}

/// Uniform degree-normalised graph Laplacian: (L X)_i = x_i - mean_{j in N(i)} x_j.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> graph_laplacian(const TriMesh& mesh) {
  if (mesh.num_vertices() == 0) throw Error(ErrorKind::Geometry, "graph_laplacian: empty mesh");
  const auto nbrs = vertex_neighbors(mesh);
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    if (nbrs[i].empty()) {
      throw Error(ErrorKind::Geometry, "graph_laplacian: vertex " + std::to_string(i) + " is isolated");
    }
    const double w = 1.0 / static_cast<double>(nbrs[i].size());
    const int row = static_cast<int>(i);
    triplets.emplace_back(row, row, 1.0);
    for (int j : nbrs[i]) triplets.emplace_back(row, j, -w);
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::SparseMatrix<double, Eigen::RowMajor> lap(n, n);
  lap.setFromTriplets(triplets.begin(), triplets.end());
  return lap;
}

/// Vertices as an N x 3 matrix.
inline Eigen::MatrixX3d vertex_matrix(const TriMesh& mesh) {
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(mesh.num_vertices()), 3);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) m.row(static_cast<Eigen::Index>(i)) = mesh.vertices()[i];
  return m;
}

/// Centres the mesh at its vertex centroid and scales it to unit max radius.
inline std::pair<TriMesh, NormalizationTransform> normalize_object(const TriMesh& mesh) {
  if (mesh.num_vertices() == 0) throw Error(ErrorKind::Geometry, "normalize_object: mesh has no vertices");
  NormalizationTransform tf;
  Vec3 sum = Vec3::Zero();
  for (const auto& v : mesh.vertices()) sum += v;
  tf.translation = sum / static_cast<double>(mesh.num_vertices());
  double radius = 0.0;
  for (const auto& v : mesh.vertices()) radius = std::max(radius, (v - tf.translation).norm());
  if (!(radius > 0.0)) throw Error(ErrorKind::Geometry, "normalize_object: all vertices coincide");
  tf.scale = radius;
  return {mesh.mapped([&](const Vec3& v) { return tf.apply(v); }), tf};
}

}  // namespace handobj
