#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "handobj/mesh.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

struct MassProperties {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about the centre of mass
};

/// Exact mass, centre of mass and inertia of a homogeneous closed polyhedron
/// (Eberly, "Polyhedral Mass Properties").
inline MassProperties mass_properties(const TriMesh& obj, double density) {
  const auto report = watertight_report(obj);
  if (!report.watertight) {
    throw Error(ErrorKind::Geometry, "mass properties require a watertight mesh (" + describe(report) + ")");
  }
  if (!(density > 0.0)) throw Error(ErrorKind::InvalidArgument, "density must be positive");

  // Integrate about the vertex centroid for conditioning.
  Vec3 shift = Vec3::Zero();
  for (const auto& v : obj.vertices()) shift += v;
  shift /= static_cast<double>(obj.num_vertices());

  auto sub = [](double w0, double w1, double w2, double& f1, double& f2, double& f3, double& g0, double& g1,
                double& g2) {
    const double t0 = w0 + w1;
    f1 = t0 + w2;
    const double t1 = w0 * w0;
    const double t2 = t1 + w1 * t0;
    f2 = t2 + w2 * f1;
    f3 = w0 * t1 + w1 * t2 + w2 * f2;
    g0 = f2 + w0 * (f1 + w0);
    g1 = f2 + w1 * (f1 + w1);
    g2 = f2 + w2 * (f1 + w2);
  };

  double integral[10] = {};
  for (const auto& [ia, ib, ic] : obj.faces()) {
    const Vec3 p0 = obj.vertex(ia) - shift, p1 = obj.vertex(ib) - shift, p2 = obj.vertex(ic) - shift;
    const Vec3 d = (p1 - p0).cross(p2 - p0);
    double f1x, f2x, f3x, g0x, g1x, g2x, f1y, f2y, f3y, g0y, g1y, g2y, f1z, f2z, f3z, g0z, g1z, g2z;
    sub(p0.x(), p1.x(), p2.x(), f1x, f2x, f3x, g0x, g1x, g2x);
    sub(p0.y(), p1.y(), p2.y(), f1y, f2y, f3y, g0y, g1y, g2y);
    sub(p0.z(), p1.z(), p2.z(), f1z, f2z, f3z, g0z, g1z, g2z);
    integral[0] += d.x() * f1x;
    integral[1] += d.x() * f2x;
    integral[2] += d.y() * f2y;
    integral[3] += d.z() * f2z;
    integral[4] += d.x() * f3x;
    integral[5] += d.y() * f3y;
    integral[6] += d.z() * f3z;
    integral[7] += d.x() * (p0.y() * g0x + p1.y() * g1x + p2.y() * g2x);
    integral[8] += d.y() * (p0.z() * g0y + p1.z() * g1y + p2.z() * g2y);
    integral[9] += d.z() * (p0.x() * g0z + p1.x() * g1z + p2.x() * g2z);
  }
  integral[0] /= 6.0;
  for (int k = 1; k <= 3; ++k) integral[k] /= 24.0;
  for (int k = 4; k <= 6; ++k) integral[k] /= 60.0;
  for (int k = 7; k <= 9; ++k) integral[k] /= 120.0;

  const double volume = integral[0];
  if (!(volume > 0.0)) throw Error(ErrorKind::Geometry, "mass properties: mesh encloses no positive volume");
  const Vec3 c(integral[1] / volume, integral[2] / volume, integral[3] / volume);

  Eigen::Matrix3d inertia;
  inertia(0, 0) = integral[5] + integral[6] - volume * (c.y() * c.y() + c.z() * c.z());
  inertia(1, 1) = integral[4] + integral[6] - volume * (c.z() * c.z() + c.x() * c.x());
  inertia(2, 2) = integral[4] + integral[5] - volume * (c.x() * c.x() + c.y() * c.y());
  inertia(0, 1) = inertia(1, 0) = -(integral[7] - volume * c.x() * c.y());
  inertia(1, 2) = inertia(2, 1) = -(integral[8] - volume * c.y() * c.z());
  inertia(0, 2) = inertia(2, 0) = -(integral[9] - volume * c.z() * c.x());

  return {density * volume, c + shift, density * inertia};
}

struct RigidState {
  Vec3 com = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

/// Drop-test constants (SI units). Gravity acts along -z.
struct SimParams {
  double gravity = 9.81;
  double duration = 1.0;
  double dt = 1e-3;
  double stiffness = 1e4;  // N/m per contact vertex
  double damping = 50.0;   // N s/m per contact vertex
  double friction = 0.5;
  double density = 1000.0;

  void validate() const {
    if (!(gravity >= 0.0)) throw Error(ErrorKind::InvalidArgument, "gravity must be non-negative");
    if (!(duration > 0.0)) throw Error(ErrorKind::InvalidArgument, "duration must be positive");
    if (!(dt > 0.0 && dt <= 1e-2)) throw Error(ErrorKind::InvalidArgument, "dt must lie in (0, 1e-2]");
    if (!(stiffness > 0.0) || !(damping >= 0.0) || !(friction >= 0.0) || !(density > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "contact constants and density must be positive");
    }
  }
};

struct TrajectorySample {
  double t;
  Vec3 com;
};

struct SimResult {
  double displacement_mm = 0.0;
  RigidState initial;
  RigidState final_state;
  MassProperties mass;
  int steps = 0;
  bool hand_closed = false;
  std::vector<TrajectorySample> trajectory;
};

/// Drops the object onto a fixed hand and reports how far its centre of mass
/// travelled. Penalty contacts at object vertices that lie inside the
/// (boundary-closed) hand: normal force k * depth - c * v_n clamped at zero,
/// tangential force -min(mu * F_n, c * |v_t|) along v_t. Semi-implicit Euler.
inline SimResult simulate_displacement(const TriMesh& hand, const TriMesh& obj, const SimParams& params,
                                       bool record_trajectory = false) {
  params.validate();
  SimResult result;
  result.mass = mass_properties(obj, params.density);
  const double m = result.mass.mass;
  const Eigen::Matrix3d inertia_body = result.mass.inertia;

  std::optional<InsideTester> hand_solid;
  Aabb hand_box;
  if (!hand.empty()) {
    hand_solid.emplace(closed_solid(hand, &result.hand_closed));
    hand_box = hand_solid->bvh().bounds();
  }

  std::vector<Vec3> body;
  body.reserve(obj.num_vertices());
  for (const auto& v : obj.vertices()) body.push_back(v - result.mass.com);
  double radius = 0.0;
  for (const auto& r : body) radius = std::max(radius, r.norm());

  RigidState s;
  s.com = result.mass.com;
  result.initial = s;
  const Vec3 g(0.0, 0.0, -params.gravity);

  // Energy scale of a free fall over the whole run plus one body radius.
  const double fall = 0.5 * params.gravity * params.duration * params.duration + radius;
  const double energy_limit = 1e3 * m * std::max(params.gravity, 1e-12) * fall;

  const int steps = static_cast<int>(std::llround(params.duration / params.dt));
  if (record_trajectory) result.trajectory.push_back({0.0, s.com});
  for (int step = 0; step < steps; ++step) {
    const Eigen::Matrix3d rot = s.orientation.toRotationMatrix();
    Vec3 force = m * g;
    Vec3 torque = Vec3::Zero();
    if (hand_solid) {
      for (const auto& r_body : body) {
        const Vec3 r = rot * r_body;
        const Vec3 p = s.com + r;
        if (!hand_box.contains(p) || !hand_solid->contains(p)) continue;
        const SurfaceHit hit = hand_solid->bvh().closest_point(p);
        if (!(hit.distance > 0.0)) continue;
        const Vec3 n = (hit.point - p) / hit.distance;
        const Vec3 vp = s.linear_velocity + s.angular_velocity.cross(r);
        const double vn = vp.dot(n);
        const double fn = std::max(0.0, params.stiffness * hit.distance - params.damping * vn);
        Vec3 f = fn * n;
        const Vec3 vt = vp - vn * n;
        const double vt_norm = vt.norm();
        if (vt_norm > 0.0) f -= std::min(params.friction * fn, params.damping * vt_norm) * (vt / vt_norm);
        force += f;
        torque += r.cross(f);
      }
    }
    const Eigen::Matrix3d inertia_world = rot * inertia_body * rot.transpose();
    s.linear_velocity += params.dt * force / m;
    s.angular_velocity += params.dt * inertia_world.ldlt().solve(
                                          torque - s.angular_velocity.cross(inertia_world * s.angular_velocity));
    s.com += params.dt * s.linear_velocity;
    const Vec3 half = 0.5 * params.dt * s.angular_velocity;
    Eigen::Quaterniond dq(0.0, half.x(), half.y(), half.z());
    dq = dq * s.orientation;
    s.orientation.coeffs() += dq.coeffs();
    s.orientation.normalize();

    const double kinetic = 0.5 * m * s.linear_velocity.squaredNorm() +
                           0.5 * s.angular_velocity.dot(inertia_world * s.angular_velocity);
    if (!std::isfinite(kinetic) || !s.com.allFinite() || kinetic > energy_limit) {
      throw Error(ErrorKind::Divergence, "simulation became unstable at step " + std::to_string(step) +
                                             " (kinetic energy " + std::to_string(kinetic) + " J, limit " +
                                             std::to_string(energy_limit) + " J)");
    }
    if (record_trajectory) result.trajectory.push_back({(step + 1) * params.dt, s.com});
  }
  result.steps = steps;
  result.final_state = s;
  result.displacement_mm = (s.com - result.initial.com).norm() * 1000.0;
  return result;
}

}  // namespace handobj
