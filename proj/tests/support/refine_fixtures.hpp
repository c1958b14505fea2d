#pragma once

// Hand/object configurations for the refinement tests and the acceptance run.

#include <string>
#include <vector>

#include "handobj/handobj.hpp"
#include "support/fixtures.hpp"

namespace handobj::fixtures {

struct RefineFixture {
  std::string name;
  TriMesh hand;
  HandAnnotation annotation;
  TriMesh obj;
};

/// Cupped synthetic hand with a level-4 sphere: one fixture that starts
/// penetrating the fingers, three that start short of contact.
inline std::vector<RefineFixture> refine_suite() {
  const auto hand = synthetic_hand();
  auto make = [&](std::string name, double radius, const Vec3& center) {
    return RefineFixture{std::move(name), hand.mesh, hand.annotation, sphere(4, radius, center)};
  };
  return {
      make("penetrating", 0.040, Vec3(0.008, 0.0, 0.0)),
      make("offset_up", 0.035, Vec3(-0.005, 0.0, 0.005)),
      make("offset_fingers", 0.030, Vec3(0.012, 0.0, -0.005)),
      make("centered", 0.040, Vec3::Zero()),
  };
}

/// Six flat pads in a 3 x 2 grid on z = 0 with their upper faces as contact
/// regions, and a sphere hovering `gap` above the grid.
inline RefineFixture pad_fixture(double gap) {
  const TriMesh unit = icosphere(1);
  std::vector<TriMesh> parts;
  HandAnnotation ann;
  const double spacing = 0.006, half_height = 0.0015;
  int offset = 0;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 3; ++i) {
      const Vec3 c((i - 1) * spacing, (j - 0.5) * spacing, 0.0);
      parts.push_back(unit.mapped([&](const Vec3& p) { return Vec3(c + Vec3(0.0025, 0.0025, half_height).cwiseProduct(p)); }));
      std::vector<int> part, top;
      for (std::size_t k = 0; k < unit.num_vertices(); ++k) {
        part.push_back(offset + static_cast<int>(k));
        if (unit.vertices()[k].z() >= 0.5) top.push_back(offset + static_cast<int>(k));
      }
      ann.regions.push_back(top);
      ann.phalanges.push_back(part);
      offset += static_cast<int>(unit.num_vertices());
    }
  }
  const double radius = 0.03;
  return {"pads", merge(parts), ann, sphere(5, radius, Vec3(0.0, 0.0, half_height + gap + radius))};
}

}  // namespace handobj::fixtures
