#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "handobj/losses.hpp"
#include "handobj/metrics.hpp"
#include "handobj/mesh.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

enum class RefineMode { ObjectPose, HandVertices, Both };

inline std::string to_string(RefineMode mode) {
  switch (mode) {
    case RefineMode::ObjectPose:
      return "object_pose";
    case RefineMode::HandVertices:
      return "hand_vertices";
    case RefineMode::Both:
      return "both";
  }
  return "object_pose";
}

inline RefineMode parse_refine_mode(const std::string& s) {
  if (s == "object_pose" || s == "object") return RefineMode::ObjectPose;
  if (s == "hand_vertices" || s == "hand") return RefineMode::HandVertices;
  if (s == "both") return RefineMode::Both;
  throw Error(ErrorKind::InvalidArgument, "unknown refine mode '" + s + "'");
}

struct RefineConfig {
  RefineMode mode = RefineMode::ObjectPose;
  double step = 1e-4;  // 1e-3 overshoots into divergence under pure repulsion
  int iterations = 200;
  ContactParams contact;
  double hand_laplacian_weight = 0.1;  // hand_vertices / both modes
  double divergence_factor = 10.0;

  void validate() const {
    if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "refine step must be positive");
    if (iterations < 1) throw Error(ErrorKind::InvalidArgument, "refine needs at least one iteration");
    if (!(hand_laplacian_weight >= 0.0)) throw Error(ErrorKind::InvalidArgument, "laplacian weight must be non-negative");
    contact.validate();
  }

  bool moves_object() const { return mode != RefineMode::HandVertices; }
  bool moves_hand() const { return mode != RefineMode::ObjectPose; }

  /// Loss weights (contact, hand Laplacian) normalised to sum to one.
  std::pair<double, double> normalized_weights() const {
    const double lap = moves_hand() ? hand_laplacian_weight : 0.0;
    const double total = contact.mu_c + lap;
    if (!(total > 0.0)) return {1.0, 0.0};
    return {contact.mu_c / total, lap / total};
  }
};

struct RefineStep {
  double loss = 0.0;
  double repulsion = 0.0;
  double attraction = 0.0;
  double penetration_depth_mm = 0.0;
  std::vector<double> region_gaps;  // per region; 0 when the region is fully interior
};

/// Object pose maps an original vertex x to R (x - c) + c + t, with c the
/// original vertex centroid.
struct RefineTrace {
  std::vector<RefineStep> steps;
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // axis-angle
};

struct RefineResult {
  TriMesh hand;
  TriMesh obj;
  RefineTrace trace;
};

class RefineDiverged : public Error {
 public:
  RefineDiverged(const std::string& what, RefineTrace trace)
      : Error(ErrorKind::Divergence, what), trace_(std::move(trace)) {}
  const RefineTrace& trace() const { return trace_; }

 private:
  RefineTrace trace_;
};

/// Fixed-step gradient descent (no momentum) on the weighted contact objective.
/// Interior masks and nearest vertices are recomputed every iteration.
inline RefineResult refine(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                           const RefineConfig& config) {
  config.validate();
  annotation.validate(hand.num_vertices());
  const auto report = watertight_report(obj);
  if (!report.watertight) {
    throw Error(ErrorKind::Geometry, "refine requires a watertight object (" + describe(report) + ")");
  }
  const auto [w_contact, w_lap] = config.normalized_weights();

  Vec3 center = Vec3::Zero();
  for (const auto& v : obj.vertices()) center += v;
  center /= static_cast<double>(obj.num_vertices());

  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();
  std::vector<Vec3> hand_vertices = hand.vertices();
  TriMesh cur_hand = hand;
  TriMesh cur_obj = obj;

  RefineTrace trace;
  double initial = 0.0;
  for (int it = 0; it <= config.iterations; ++it) {
    const InsideTester solid(cur_obj);
    const ContactTerms terms = contact_terms(cur_hand, cur_obj, annotation, config.contact, solid);
    MeshLoss lap;
    if (config.moves_hand() && w_lap > 0.0) lap = laplacian_loss(cur_hand);

    RefineStep entry;
    entry.repulsion = terms.repulsion.value;
    entry.attraction = terms.attraction.value;
    entry.loss = w_contact * terms.contact.value + w_lap * lap.value;
    entry.penetration_depth_mm = penetration_depth_mm(cur_hand, solid);
    for (const auto& gap : terms.gaps) entry.region_gaps.push_back(gap.distance);
    trace.steps.push_back(std::move(entry));

    const double loss = trace.steps.back().loss;
    if (it == 0) initial = loss;
    if (!std::isfinite(loss) || loss > config.divergence_factor * std::max(initial, 1e-12)) {
      trace.translation = translation;
      const Eigen::AngleAxisd aa(rotation);
      trace.rotation = aa.angle() * aa.axis();
      throw RefineDiverged("refinement diverged at iteration " + std::to_string(it) + " (loss " +
                               std::to_string(loss) + ", initial " + std::to_string(initial) + ")",
                           std::move(trace));
    }
    if (it == config.iterations) break;

    if (config.moves_object()) {
      const Vec3 cur_center = center + translation;
      Vec3 g_trans = Vec3::Zero(), g_rot = Vec3::Zero();
      for (std::size_t i = 0; i < cur_obj.num_vertices(); ++i) {
        const Vec3 g = w_contact * terms.contact.gradient_obj[i];
        g_trans += g;
        g_rot += (cur_obj.vertices()[i] - cur_center).cross(g);
      }
      const Vec3 d_rot = -config.step * g_rot;
      const double angle = d_rot.norm();
      if (angle > 0.0) rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, d_rot / angle)) * rotation;
      rotation.normalize();
      translation -= config.step * g_trans;
      const Eigen::Matrix3d rot = rotation.toRotationMatrix();
      cur_obj = obj.mapped([&](const Vec3& x) { return Vec3(rot * (x - center) + center + translation); });
    }
    if (config.moves_hand()) {
      for (std::size_t i = 0; i < hand_vertices.size(); ++i) {
        Vec3 g = w_contact * terms.contact.gradient_hand[i];
        if (w_lap > 0.0) g += w_lap * lap.gradient[i];
        hand_vertices[i] -= config.step * g;
      }
      cur_hand = hand.with_vertices(hand_vertices);
    }
  }
  trace.translation = translation;
  const Eigen::AngleAxisd aa(rotation);
  trace.rotation = aa.angle() * aa.axis();
  return {cur_hand, cur_obj, std::move(trace)};
}

}  // namespace handobj
