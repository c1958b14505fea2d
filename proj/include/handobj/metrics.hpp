#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <vector>

#include "handobj/mesh.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

inline constexpr double kDefaultVoxelSize = 0.005;      // m
inline constexpr double kDefaultContactVicinity = 0.003;  // m
inline constexpr double kDefaultRegionFrequency = 0.08;

/// Largest surface distance (mm) over hand vertices inside the object; 0 without collision.
inline double penetration_depth_mm(const TriMesh& hand, const InsideTester& solid) {
  double depth = 0.0;
  for (const auto& v : hand.vertices()) {
    if (solid.contains(v)) depth = std::max(depth, solid.bvh().closest_point(v).distance);
  }
  return depth * 1000.0;
}

inline double penetration_depth_mm(const TriMesh& hand, const TriMesh& obj) {
  return penetration_depth_mm(hand, InsideTester(obj));
}

struct IntersectionVolume {
  double volume_cm3 = 0.0;
  std::size_t shared_voxels = 0;
  double voxel_size = kDefaultVoxelSize;
  bool hand_closed = false;  // hand boundary loops were fan-closed
  bool obj_closed = false;
};

/// Both meshes voxelised on one grid anchored at the padded union box.
inline IntersectionVolume intersection_volume(const TriMesh& hand, const TriMesh& obj, double h = kDefaultVoxelSize) {
  IntersectionVolume out;
  out.voxel_size = h;
  const TriMesh hand_solid = closed_solid(hand, &out.hand_closed);
  const TriMesh obj_solid = closed_solid(obj, &out.obj_closed);
  Aabb bounds = bounds_of(hand_solid);
  bounds.expand(bounds_of(obj_solid));
  bounds.lo -= Vec3::Constant(2.0 * h);
  bounds.hi += Vec3::Constant(2.0 * h);
  const VoxelGrid a = voxelize_solid(hand_solid, h, bounds);
  const VoxelGrid b = voxelize_solid(obj_solid, h, bounds);
  for (std::size_t i = 0; i < a.size(); ++i) out.shared_voxels += (a.occupancy[i] && b.occupancy[i]) ? 1 : 0;
  out.volume_cm3 = static_cast<double>(out.shared_voxels) * h * h * h * 1e6;
  return out;
}

inline double intersection_volume_cm3(const TriMesh& hand, const TriMesh& obj, double h = kDefaultVoxelSize) {
  return intersection_volume(hand, obj, h).volume_cm3;
}

struct HandObjectPair {
  TriMesh hand;
  TriMesh obj;
};

/// Hand vertices frequently within `vicinity` of the object surface, grouped into
/// connected components sorted by size (descending), then by smallest vertex.
inline std::vector<std::vector<int>> extract_contact_regions(const std::vector<HandObjectPair>& pairs,
                                                             double vicinity = kDefaultContactVicinity,
                                                             double freq_threshold = kDefaultRegionFrequency) {
  if (pairs.empty()) throw Error(ErrorKind::InvalidArgument, "extract_contact_regions: no grasps given");
  const TriMesh& reference = pairs.front().hand;
  for (std::size_t p = 1; p < pairs.size(); ++p) {
    if (pairs[p].hand.num_vertices() != reference.num_vertices() || pairs[p].hand.faces() != reference.faces()) {
      throw Error(ErrorKind::Geometry, "extract_contact_regions: hand " + std::to_string(p) +
                                           " does not share the topology of hand 0");
    }
  }
  std::vector<int> hits(reference.num_vertices(), 0);
  for (const auto& pair : pairs) {
    const Bvh bvh(pair.obj);
    for (std::size_t i = 0; i < pair.hand.num_vertices(); ++i) {
      if (bvh.closest_point(pair.hand.vertices()[i]).distance <= vicinity) ++hits[i];
    }
  }
  const auto n = static_cast<double>(pairs.size());
  std::vector<bool> keep(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) keep[i] = static_cast<double>(hits[i]) / n >= freq_threshold;

  const auto nbrs = vertex_neighbors(reference);
  std::vector<bool> seen(hits.size(), false);
  std::vector<std::vector<int>> regions;
  for (std::size_t s = 0; s < hits.size(); ++s) {
    if (!keep[s] || seen[s]) continue;
    std::vector<int> component;
    std::queue<int> frontier;
    frontier.push(static_cast<int>(s));
    seen[s] = true;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      component.push_back(v);
      for (int w : nbrs[static_cast<std::size_t>(v)]) {
        if (keep[static_cast<std::size_t>(w)] && !seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = true;
          frontier.push(w);
        }
      }
    }
    std::sort(component.begin(), component.end());
    regions.push_back(std::move(component));
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const auto& x, const auto& y) { return x.size() > y.size(); });
  return regions;
}

/// Physical-plausibility report for one hand-object pair. Units as named.
struct MetricsReport {
  double penetration_depth_mm = 0.0;
  double intersection_volume_cm3 = 0.0;
  std::optional<double> sim_displacement_mm;
  std::optional<double> chamfer;        // raw, m^2
  std::optional<double> chamfer_x1000;  // raw * 1000
  std::optional<double> epsilon;
  std::optional<double> volume_v;
  std::optional<double> volume_v_std_error;
  std::optional<int> n_phalanges;
  std::optional<bool> palm_contact;
  std::optional<double> score_g;
  bool hand_boundary_closed = false;
};

}  // namespace handobj
