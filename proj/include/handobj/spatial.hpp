#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "handobj/mesh.hpp"

namespace handobj {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
  Vec3 extent() const { return hi - lo; }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
  bool contains(const Aabb& b, double tol = 0.0) const { return contains(b.lo, tol) && contains(b.hi, tol); }

  double squared_distance(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  /// Slab test against the ray origin + t * dir, t >= 0.
  bool hit_by_ray(const Vec3& origin, const Vec3& inv_dir) const {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      double t0 = (lo[k] - origin[k]) * inv_dir[k];
      double t1 = (hi[k] - origin[k]) * inv_dir[k];
      if (t0 > t1) std::swap(t0, t1);
      // NaN (0 * inf) means the origin lies on the slab plane: keep the ray.
      if (!(t0 <= tmax) && !std::isnan(t0)) return false;
      if (t0 > tmin) tmin = t0;
      if (t1 < tmax) tmax = t1;
      if (tmin > tmax) return false;
    }
    return true;
  }
};

inline Aabb bounds_of(const std::vector<Vec3>& pts) {
  Aabb b;
  for (const auto& p : pts) b.expand(p);
  return b;
}

inline Aabb bounds_of(const TriMesh& mesh) { return bounds_of(mesh.vertices()); }

/// Closest point on triangle (a, b, c) to p (Ericson, Real-Time Collision Detection 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct SurfaceHit {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 point = Vec3::Zero();
  int face = -1;
};

/// Axis-aligned bounding-box tree over the triangles of a mesh. Nodes split at
/// the median centroid along the longest axis.
class Bvh {
 public:
  struct Node {
    Aabb box;
    int left = -1;  // child node indices; -1 for leaves
    int right = -1;
    int begin = 0;  // range into face_order() for leaves
    int end = 0;
    bool leaf() const { return left < 0; }
  };

  Bvh() = default;

  explicit Bvh(const TriMesh& mesh, int leaf_size = 4) : mesh_(mesh), leaf_size_(std::max(1, leaf_size)) {
    if (mesh.empty()) throw Error(ErrorKind::Geometry, "Bvh: mesh has no faces");
    order_.resize(mesh.num_faces());
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.resize(mesh.num_faces());
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
      const auto& [a, b, c] = mesh.faces()[f];
      centroids_[f] = (mesh.vertex(a) + mesh.vertex(b) + mesh.vertex(c)) / 3.0;
    }
    nodes_.reserve(2 * mesh.num_faces() / static_cast<std::size_t>(leaf_size_) + 1);
    build(0, static_cast<int>(order_.size()));
    centroids_.clear();
    centroids_.shrink_to_fit();
  }

  const TriMesh& mesh() const { return mesh_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return order_; }
  int leaf_size() const { return leaf_size_; }
  const Aabb& bounds() const { return nodes_.front().box; }

  /// Exact closest point over all faces; ties go to the lowest face index.
  SurfaceHit closest_point(const Vec3& p) const {
    double best_sq = std::numeric_limits<double>::infinity();
    int best_face = -1;
    Vec3 best_point = Vec3::Zero();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
      if (node.box.squared_distance(p) > best_sq) continue;
      if (node.leaf()) {
        for (int i = node.begin; i < node.end; ++i) {
          const int f = order_[static_cast<std::size_t>(i)];
          const auto& [a, b, c] = mesh_.faces()[static_cast<std::size_t>(f)];
          const Vec3 q = closest_point_on_triangle(p, mesh_.vertex(a), mesh_.vertex(b), mesh_.vertex(c));
          const double d2 = (p - q).squaredNorm();
          if (d2 < best_sq || (d2 == best_sq && f < best_face)) {
            best_sq = d2;
            best_face = f;
            best_point = q;
          }
        }
        continue;
      }
      const Node& l = nodes_[static_cast<std::size_t>(node.left)];
      const Node& r = nodes_[static_cast<std::size_t>(node.right)];
      const double dl = l.box.squared_distance(p), dr = r.box.squared_distance(p);
      // Visit the nearer child first.
      if (dl <= dr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
    return {std::sqrt(best_sq), best_point, best_face};
  }

  /// Calls fn(face) for every face whose leaf box is crossed by the ray.
  template <typename F>
  void for_each_ray_candidate(const Vec3& origin, const Vec3& dir, F&& fn) const {
    const Vec3 inv_dir = dir.cwiseInverse();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
      if (!node.box.hit_by_ray(origin, inv_dir)) continue;
      if (node.leaf()) {
        for (int i = node.begin; i < node.end; ++i) fn(order_[static_cast<std::size_t>(i)]);
      } else {
        stack[top++] = node.right;
        stack[top++] = node.left;
      }
    }
  }

 private:
  int build(int begin, int end) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box, cbox;
    for (int i = begin; i < end; ++i) {
      const int f = order_[static_cast<std::size_t>(i)];
      for (int v : mesh_.faces()[static_cast<std::size_t>(f)]) box.expand(mesh_.vertex(v));
      cbox.expand(centroids_[static_cast<std::size_t>(f)]);
    }
    nodes_[static_cast<std::size_t>(index)].box = box;
    nodes_[static_cast<std::size_t>(index)].begin = begin;
    nodes_[static_cast<std::size_t>(index)].end = end;
    if (end - begin <= leaf_size_) return index;

    int axis = 0;
    cbox.extent().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      const double ca = centroids_[static_cast<std::size_t>(a)][axis];
      const double cb = centroids_[static_cast<std::size_t>(b)][axis];
      return ca < cb || (ca == cb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  TriMesh mesh_;
  int leaf_size_ = 4;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
};

/// Exact point-to-surface distance (builds a BVH; hold a Bvh for batches).
inline SurfaceHit point_surface_distance(const Vec3& p, const TriMesh& mesh) {
  if (mesh.empty()) throw Error(ErrorKind::Geometry, "point_surface_distance: mesh has no faces");
  return Bvh(mesh).closest_point(p);
}

struct VertexHit {
  double distance = std::numeric_limits<double>::infinity();
  int index = -1;
};

/// Nearest point of a discrete set (not the surface); ties go to the lowest index.
inline VertexHit point_vertexset_distance(const Vec3& p, const std::vector<Vec3>& points) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "point_vertexset_distance: empty point set");
  double best = std::numeric_limits<double>::infinity();
  int index = -1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = (p - points[i]).squaredNorm();
    if (d2 < best) {
      best = d2;
      index = static_cast<int>(i);
    }
  }
  return {std::sqrt(best), index};
}

/// k-d tree over a point set for nearest-neighbour queries. Same results as a
/// linear scan, including the lowest-index tie break.
class PointTree {
 public:
  PointTree() = default;

  explicit PointTree(std::vector<Vec3> points, int leaf_size = 8)
      : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
    if (points_.empty()) throw Error(ErrorKind::InvalidArgument, "PointTree: empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    build(0, static_cast<int>(order_.size()));
  }

  const std::vector<Vec3>& points() const { return points_; }

  VertexHit nearest(const Vec3& p) const {
    double best_sq = std::numeric_limits<double>::infinity();
    int best = -1;
    search(0, p, best_sq, best);
    return {std::sqrt(best_sq), best};
  }

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };

  int build(int begin, int end) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    for (int i = begin; i < end; ++i) box.expand(points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
    nodes_[static_cast<std::size_t>(index)].box = box;
    nodes_[static_cast<std::size_t>(index)].begin = begin;
    nodes_[static_cast<std::size_t>(index)].end = end;
    if (end - begin <= leaf_size_) return index;
    int axis = 0;
    box.extent().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      const double pa = points_[static_cast<std::size_t>(a)][axis], pb = points_[static_cast<std::size_t>(b)][axis];
      return pa < pb || (pa == pb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  void search(int ni, const Vec3& p, double& best_sq, int& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.box.squared_distance(p) > best_sq) return;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[static_cast<std::size_t>(i)];
        const double d2 = (p - points_[static_cast<std::size_t>(idx)]).squaredNorm();
        if (d2 < best_sq || (d2 == best_sq && idx < best)) {
          best_sq = d2;
          best = idx;
        }
      }
      return;
    }
    const double dl = nodes_[static_cast<std::size_t>(node.left)].box.squared_distance(p);
    const double dr = nodes_[static_cast<std::size_t>(node.right)].box.squared_distance(p);
    if (dl <= dr) {
      search(node.left, p, best_sq, best);
      search(node.right, p, best_sq, best);
    } else {
      search(node.right, p, best_sq, best);
      search(node.left, p, best_sq, best);
    }
  }

  std::vector<Vec3> points_;
  int leaf_size_ = 8;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

// ---------------------------------------------------------------------------
// Inside / outside

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic pseudo-random unit direction for retry `attempt`.
inline Vec3 ray_direction(std::uint64_t seed, int attempt) {
  std::uint64_t state = seed * 0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(attempt);
  while (true) {
    Vec3 d;
    for (int k = 0; k < 3; ++k) {
      d[k] = 2.0 * (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53) - 1.0;
    }
    const double n = d.norm();
    // Axis-aligned directions hit slab/edge coincidences far more often.
    if (n > 0.1 && n <= 1.0 && d.cwiseAbs().minCoeff() > 1e-3) return d / n;
  }
}

}  // namespace detail

/// Ray-parity point-in-solid test for a watertight mesh. Rays that pass within
/// a barycentric tolerance of an edge or vertex are re-cast along a new
/// deterministic direction.
class InsideTester {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed;
  static constexpr double kEdgeTolerance = 1e-9;
  static constexpr double kSurfaceTolerance = 1e-12;

  explicit InsideTester(const TriMesh& mesh, std::uint64_t seed = kDefaultSeed, int max_attempts = 16)
      : seed_(seed), max_attempts_(max_attempts) {
    const auto report = watertight_report(mesh);
    if (!report.watertight) {
      throw Error(ErrorKind::Geometry, "inside test requires a watertight mesh (" + describe(report) + ")");
    }
    bvh_ = Bvh(mesh);
  }

  const Bvh& bvh() const { return bvh_; }
  const TriMesh& mesh() const { return bvh_.mesh(); }

  /// Points on the surface (within 1e-12) are reported as outside.
  bool contains(const Vec3& p) const {
    if (!bvh_.bounds().contains(p)) return false;
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
      switch (cast(p, detail::ray_direction(seed_, attempt))) {
        case Cast::Inside:
          return true;
        case Cast::Outside:
        case Cast::OnSurface:
          return false;
        case Cast::Degenerate:
          break;
      }
    }
    throw Error(ErrorKind::Geometry, "inside test: ray retry budget exhausted");
  }

 private:
  enum class Cast { Inside, Outside, OnSurface, Degenerate };

  Cast cast(const Vec3& origin, const Vec3& dir) const {
    const TriMesh& mesh = bvh_.mesh();
    int crossings = 0;
    bool degenerate = false, on_surface = false;
    bvh_.for_each_ray_candidate(origin, dir, [&](int f) {
      if (degenerate || on_surface) return;
      const auto& [ia, ib, ic] = mesh.faces()[static_cast<std::size_t>(f)];
      const Vec3 &a = mesh.vertex(ia), &b = mesh.vertex(ib), &c = mesh.vertex(ic);
      // Moller-Trumbore
      const Vec3 e1 = b - a, e2 = c - a;
      const Vec3 pvec = dir.cross(e2);
      const double det = e1.dot(pvec);
      if (std::abs(det) <= 1e-300) return;
      const double inv = 1.0 / det;
      const Vec3 s = origin - a;
      const double u = s.dot(pvec) * inv;
      if (u < -kEdgeTolerance || u > 1.0 + kEdgeTolerance) return;
      const Vec3 q = s.cross(e1);
      const double v = dir.dot(q) * inv;
      if (v < -kEdgeTolerance || u + v > 1.0 + kEdgeTolerance) return;
      const double t = e2.dot(q) * inv;
      if (std::abs(t) <= kSurfaceTolerance) {
        on_surface = true;
        return;
      }
      if (t < 0.0) return;
      if (std::min({u, v, 1.0 - u - v}) < kEdgeTolerance) {
        degenerate = true;
        return;
      }
      ++crossings;
    });
    if (on_surface) return Cast::OnSurface;
    if (degenerate) return Cast::Degenerate;
    return (crossings % 2 == 1) ? Cast::Inside : Cast::Outside;
  }

  Bvh bvh_;
  std::uint64_t seed_ = kDefaultSeed;
  int max_attempts_ = 16;
};

inline bool is_inside(const Vec3& p, const TriMesh& mesh) { return InsideTester(mesh).contains(p); }

/// Interior mask of the hand vertices with respect to a watertight object.
inline std::vector<bool> classify_points(const std::vector<Vec3>& points, const InsideTester& solid) {
  std::vector<bool> mask(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i) mask[i] = solid.contains(points[i]);
  return mask;
}

inline std::vector<bool> classify_hand_vertices(const TriMesh& hand, const TriMesh& obj) {
  return classify_points(hand.vertices(), InsideTester(obj));
}

// ---------------------------------------------------------------------------
// Voxels

struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  double h = 0.005;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<bool> occupancy;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  bool occupied(int i, int j, int k) const { return occupancy[index(i, j, k)]; }
  Vec3 center(int i, int j, int k) const { return origin + h * Vec3(i + 0.5, j + 0.5, k + 0.5); }
  std::size_t size() const { return occupancy.size(); }
  std::size_t count() const { return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), true)); }
  double occupied_volume() const { return static_cast<double>(count()) * h * h * h; }

  static VoxelGrid covering(const Aabb& bounds, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "voxel size must be positive");
    if (!bounds.valid()) throw Error(ErrorKind::InvalidArgument, "voxel grid bounds are empty");
    VoxelGrid grid;
    grid.origin = bounds.lo;
    grid.h = h;
    for (int k = 0; k < 3; ++k) {
      grid.dims[static_cast<std::size_t>(k)] =
          std::max(1, static_cast<int>(std::ceil(bounds.extent()[k] / h - 1e-9)));
    }
    grid.occupancy.assign(static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2], false);
    return grid;
  }
};

/// Watertight version of a mesh: returned as-is when closed, otherwise boundary
/// loops are fan-closed.
inline TriMesh closed_solid(const TriMesh& mesh, bool* was_closed = nullptr) {
  const bool watertight = is_watertight(mesh);
  if (was_closed) *was_closed = !watertight;
  return watertight ? mesh : close_boundaries(mesh);
}

/// Occupancy by voxel-centre parity test.
inline VoxelGrid voxelize_solid(const TriMesh& mesh, double h, const Aabb& bounds) {
  const TriMesh solid_mesh = closed_solid(mesh);
  VoxelGrid grid = VoxelGrid::covering(bounds, h);
  if (!bounds.contains(bounds_of(solid_mesh), 1e-12)) {
    throw Error(ErrorKind::InvalidArgument, "voxelize_solid: bounds do not contain the mesh");
  }
  const InsideTester solid(solid_mesh);
  for (int k = 0; k < grid.dims[2]; ++k) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        grid.occupancy[grid.index(i, j, k)] = solid.contains(grid.center(i, j, k));
      }
    }
  }
  return grid;
}

}  // namespace handobj
