#pragma once

// Procedural meshes shared by the unit and acceptance suites.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "handobj/handobj.hpp"

namespace handobj::fixtures {

inline TriMesh box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v = {{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                         {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                         {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
  std::vector<Face> f = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                         {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  return TriMesh(std::move(v), std::move(f));
}

inline TriMesh cube(double half_edge, const Vec3& center = Vec3::Zero()) {
  return box(center - Vec3::Constant(half_edge), center + Vec3::Constant(half_edge));
}

inline TriMesh sphere(int level, double radius, const Vec3& center = Vec3::Zero()) {
  return icosphere(level).mapped([&](const Vec3& v) { return Vec3(center + radius * v); });
}

inline TriMesh tetrahedron() {
  return TriMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}});
}

/// Open tube along z without caps.
inline TriMesh open_cylinder(double radius, double height, int segments, int rings) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (int r = 0; r <= rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * M_PI * s / segments;
      v.emplace_back(radius * std::cos(a), radius * std::sin(a), height * r / rings);
    }
  }
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = r * segments + s, b = r * segments + (s + 1) % segments;
      const int c = a + segments, d = b + segments;
      f.push_back({a, b, d});
      f.push_back({a, d, c});
    }
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Regular hexagon fan around vertex 0 in the z = 0 plane.
inline TriMesh hexagon_fan(double radius = 1.0) {
  std::vector<Vec3> v = {Vec3::Zero()};
  std::vector<Face> f;
  for (int k = 0; k < 6; ++k) v.emplace_back(radius * std::cos(k * M_PI / 3), radius * std::sin(k * M_PI / 3), 0.0);
  for (int k = 0; k < 6; ++k) f.push_back({0, 1 + k, 1 + (k + 1) % 6});
  return TriMesh(std::move(v), std::move(f));
}

/// n x n vertex grid in the z = 0 plane with spacing h, split into right triangles
/// along alternating diagonals so interior neighbourhoods are symmetric in pairs.
inline TriMesh flat_grid(int n, double h = 1.0) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) v.emplace_back(i * h, j * h, 0.0);
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i, b = a + 1, c = a + n, d = c + 1;
      f.push_back({a, b, d});
      f.push_back({a, d, c});
    }
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Watertight upward-opening bowl: lower hemispherical shells of radii
/// `inner` and `outer` about `center`, joined by an annulus at the rim.
inline TriMesh thick_bowl(double inner, double outer, int segments, int rings, const Vec3& center = Vec3::Zero()) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  // Ring r = 0 is the rim (equator), ring `rings` collapses to the pole.
  auto shell = [&](double radius) {
    const int base = static_cast<int>(v.size());
    for (int r = 0; r < rings; ++r) {
      const double polar = 0.5 * M_PI * r / rings;  // angle below the rim
      for (int s = 0; s < segments; ++s) {
        const double a = 2.0 * M_PI * s / segments;
        v.push_back(center + radius * Vec3(std::cos(polar) * std::cos(a), std::cos(polar) * std::sin(a),
                                           -std::sin(polar)));
      }
    }
    v.push_back(center + Vec3(0, 0, -radius));
    return base;
  };
  const int outer_base = shell(outer);
  const int inner_base = shell(inner);
  const int pole_offset = rings * segments;
  auto idx = [&](int base, int r, int s) { return base + r * segments + (s % segments); };
  // Outer shell faces outward (away from center), inner shell faces toward center.
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      if (r + 1 < rings) {
        const int a = idx(outer_base, r, s), b = idx(outer_base, r, s + 1);
        const int c = idx(outer_base, r + 1, s), d = idx(outer_base, r + 1, s + 1);
        f.push_back({a, c, d});
        f.push_back({a, d, b});
        const int ia = idx(inner_base, r, s), ib = idx(inner_base, r, s + 1);
        const int ic = idx(inner_base, r + 1, s), id = idx(inner_base, r + 1, s + 1);
        f.push_back({ia, id, ic});
        f.push_back({ia, ib, id});
      } else {
        f.push_back({idx(outer_base, r, s), outer_base + pole_offset, idx(outer_base, r, s + 1)});
        f.push_back({idx(inner_base, r, s), idx(inner_base, r, s + 1), inner_base + pole_offset});
      }
    }
  }
  for (int s = 0; s < segments; ++s) {
    const int o0 = idx(outer_base, 0, s), o1 = idx(outer_base, 0, s + 1);
    const int i0 = idx(inner_base, 0, s), i1 = idx(inner_base, 0, s + 1);
    f.push_back({o0, o1, i1});
    f.push_back({o0, i1, i0});
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Concatenates meshes into one (disjoint components).
inline TriMesh merge(const std::vector<TriMesh>& parts) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (const auto& p : parts) {
    const int base = static_cast<int>(v.size());
    v.insert(v.end(), p.vertices().begin(), p.vertices().end());
    for (const auto& [a, b, c] : p.faces()) f.push_back({a + base, b + base, c + base});
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Cupped synthetic hand: 16 closed ellipsoidal parts (palm + 5 x 3 phalanges)
/// arranged on a sphere of radius `cage` around `center`, palm at -z. Each
/// part is `thickness` thick radially, so its inner face sits at
/// cage - thickness from the centre.
struct SyntheticHand {
  TriMesh mesh;
  HandAnnotation annotation;
  std::vector<Vec3> part_centers;
  std::vector<Vec3> part_inward;  // unit direction from each part toward `center`
};

inline SyntheticHand synthetic_hand(double cage = 0.05, double thickness = 0.006, int level = 1,
                                    const Vec3& center = Vec3::Zero()) {
  SyntheticHand hand;
  std::vector<TriMesh> parts;
  const TriMesh unit = icosphere(level);
  std::vector<std::vector<int>> part_vertices;
  int offset = 0;

  auto add_part = [&](const Vec3& radial, const Vec3& tangent, const Vec3& lateral, const Vec3& semi) {
    const Vec3 c = center + cage * radial;
    Eigen::Matrix3d frame;
    frame.col(0) = tangent;
    frame.col(1) = lateral;
    frame.col(2) = radial;
    parts.push_back(unit.mapped([&](const Vec3& p) { return Vec3(c + frame * semi.cwiseProduct(p)); }));
    std::vector<int> ids(unit.num_vertices());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = offset + static_cast<int>(i);
    offset += static_cast<int>(unit.num_vertices());
    part_vertices.push_back(ids);
    hand.part_centers.push_back(c);
    hand.part_inward.push_back(-radial);
  };

  // Phalanges: 4 fingers and an opposing thumb, 3 segments each.
  const double azimuths[5] = {-60.0, -20.0, 20.0, 60.0, 180.0};
  const double polars[3] = {55.0, 85.0, 115.0};
  for (double az_deg : azimuths) {
    for (double pol_deg : polars) {
      const double az = az_deg * M_PI / 180.0, pol = pol_deg * M_PI / 180.0;
      const Vec3 radial(std::sin(pol) * std::cos(az), std::sin(pol) * std::sin(az), -std::cos(pol));
      const Vec3 tangent(std::cos(pol) * std::cos(az), std::cos(pol) * std::sin(az), std::sin(pol));
      const Vec3 lateral = radial.cross(tangent).normalized();
      add_part(radial, tangent, lateral, Vec3(0.010, 0.007, thickness));
    }
  }
  // Palm.
  add_part(Vec3(0, 0, -1), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0.030, 0.030, thickness));

  hand.mesh = merge(parts);
  // Inner-facing vertices: unit-sphere preimage within 60 degrees of the inward axis.
  auto inner_facing = [&](std::size_t part, double min_cos) {
    std::vector<int> out;
    for (std::size_t i = 0; i < unit.num_vertices(); ++i) {
      if (-unit.vertices()[i].z() >= min_cos) out.push_back(part_vertices[part][i]);
    }
    return out;
  };
  for (int finger = 0; finger < 5; ++finger) {
    hand.annotation.regions.push_back(inner_facing(static_cast<std::size_t>(finger * 3 + 2), 0.5));
  }
  hand.annotation.regions.push_back(inner_facing(15, 0.5));
  hand.annotation.palm = part_vertices[15];
  hand.annotation.phalanges = part_vertices;
  return hand;
}

/// Uniform random rotation (from a normalised Gaussian quaternion).
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

}  // namespace handobj::fixtures
