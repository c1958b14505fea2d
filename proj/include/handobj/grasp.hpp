#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "handobj/losses.hpp"
#include "handobj/mesh.hpp"
#include "handobj/sim.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

using Wrench = Eigen::Matrix<double, 6, 1>;

/// Point contact on the object surface; `normal` points into the object.
struct Contact {
  Vec3 position;
  Vec3 normal;
  int hand_vertex = -1;
};

/// Discretised grasp wrench space: unit forces on the friction-cone boundary
/// and their torques about the centre of mass, divided by `torque_scale`.
struct WrenchSet {
  std::vector<Wrench> primitives;
  double mu = 1.0;
  int cone_edges = 8;
  double torque_scale = 1.0;
};

struct GraspParams {
  double mu = 1.0;
  int cone_edges = 8;
  double delta = 0.003;  // contact distance threshold (m)
  int n_dirs = 4096;
  int refine_iters = 50;
  int n_samples = 200000;
  std::uint64_t seed = 0;
};

struct GraspQuality {
  double epsilon = 0.0;
  double volume_v = 0.0;
  double volume_std_error = 0.0;
  int n_phalanges = 0;
  bool palm_contact = false;
  double score_g = 0.0;
  std::size_t n_contacts = 0;
};

/// One contact per hand vertex within `delta` of the object surface (interior
/// vertices included), placed at the closest surface point.
inline std::vector<Contact> extract_contacts(const TriMesh& hand, const Bvh& obj_bvh, double delta) {
  std::vector<Contact> contacts;
  for (std::size_t i = 0; i < hand.num_vertices(); ++i) {
    const SurfaceHit hit = obj_bvh.closest_point(hand.vertices()[i]);
    if (hit.distance <= delta) {
      contacts.push_back({hit.point, -obj_bvh.mesh().face_normal(static_cast<std::size_t>(hit.face)),
                          static_cast<int>(i)});
    }
  }
  return contacts;
}

inline std::vector<Contact> extract_contacts(const TriMesh& hand, const TriMesh& obj, double delta = 0.003) {
  const auto report = watertight_report(obj);
  if (!report.watertight) {
    throw Error(ErrorKind::Geometry, "extract_contacts requires a watertight object (" + describe(report) + ")");
  }
  return extract_contacts(hand, Bvh(obj), delta);
}

/// Friction-cone edges per contact. mu = 0 gives a single normal force
/// (frictionless point contact).
inline WrenchSet wrench_primitives(const std::vector<Contact>& contacts, double mu, int cone_edges,
                                   const Vec3& center_of_mass, double torque_scale) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidArgument, "friction coefficient must be non-negative");
  if (cone_edges < 3) throw Error(ErrorKind::InvalidArgument, "friction cone needs at least 3 edges");
  if (!(torque_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "torque scale must be positive");
  WrenchSet ws;
  ws.mu = mu;
  ws.cone_edges = cone_edges;
  ws.torque_scale = torque_scale;
  const double half_angle = std::atan(mu);
  const double c = std::cos(half_angle), s = std::sin(half_angle);
  for (const auto& contact : contacts) {
    const double len = contact.normal.norm();
    if (!(std::abs(len - 1.0) < 1e-6)) {
      throw Error(ErrorKind::Geometry, "contact normal is degenerate (norm " + std::to_string(len) + ")");
    }
    const Vec3 n = contact.normal / len;
    const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 t1 = n.cross(helper).normalized();
    const Vec3 t2 = n.cross(t1);
    const Vec3 arm = contact.position - center_of_mass;
    const int edges = mu == 0.0 ? 1 : cone_edges;
    for (int k = 0; k < edges; ++k) {
      const double phi = 2.0 * M_PI * k / cone_edges;
      const Vec3 f = (c * n + s * (std::cos(phi) * t1 + std::sin(phi) * t2)).normalized();
      Wrench w;
      w.head<3>() = f;
      w.tail<3>() = arm.cross(f) / torque_scale;
      ws.primitives.push_back(w);
    }
  }
  return ws;
}

namespace detail {

inline Eigen::Matrix<double, Eigen::Dynamic, 6> primitive_matrix(const WrenchSet& ws) {
  Eigen::Matrix<double, Eigen::Dynamic, 6> w(static_cast<Eigen::Index>(ws.primitives.size()), 6);
  for (std::size_t i = 0; i < ws.primitives.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = ws.primitives[i].transpose();
  return w;
}

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

/// Halton points in [0,1)^6 with a seeded Cranley-Patterson shift, mapped to
/// the unit 5-sphere through Box-Muller pairs.
inline std::vector<Wrench> sphere_directions(int n, std::uint64_t seed) {
  static constexpr std::array<std::uint64_t, 6> primes = {2, 3, 5, 7, 11, 13};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<double, 6> shift{};
  for (auto& s : shift) s = unif(rng);
  std::vector<Wrench> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::array<double, 6> u{};
    for (std::size_t k = 0; k < 6; ++k) {
      u[k] = radical_inverse(static_cast<std::uint64_t>(i) + 1, primes[k]) + shift[k];
      if (u[k] >= 1.0) u[k] -= 1.0;
    }
    Wrench d;
    for (int k = 0; k < 3; ++k) {
      const double r = std::sqrt(-2.0 * std::log(std::max(1.0 - u[2 * k], 1e-300)));
      d[2 * k] = r * std::cos(2.0 * M_PI * u[2 * k + 1]);
      d[2 * k + 1] = r * std::sin(2.0 * M_PI * u[2 * k + 1]);
    }
    const double norm = d.norm();
    dirs.push_back(norm > 0.0 ? Wrench(d / norm) : Wrench(Wrench::UnitX()));
  }
  return dirs;
}

/// Local maximisation of |y| over the polar polytope {y : W y <= b} by walking
/// its vertices, started from the boundary point along `start`. Each vertex
/// y is a facet {x : y.x = 1} of the wrench hull at distance 1/|y|. Returns
/// the unit facet direction found, or nullopt when the polar is unbounded
/// (origin not strictly inside the hull).
inline std::optional<Wrench> polar_vertex_walk(const Eigen::Matrix<double, Eigen::Dynamic, 6>& w,
                                               const Eigen::VectorXd& b, const Wrench& start, int max_steps) {
  const Eigen::Index n = w.rows();
  const Eigen::VectorXd s0 = w * start;
  Eigen::Index first = 0;
  const double h = s0.maxCoeff(&first);
  if (!(h > 0.0)) return std::nullopt;
  Wrench y = start / h;
  std::vector<Eigen::Index> tight = {first};

  auto in_tight = [&](Eigen::Index i) { return std::find(tight.begin(), tight.end(), i) != tight.end(); };
  // Largest step along d before a non-tight constraint becomes tight.
  auto ratio_test = [&](const Wrench& d, Eigen::Index& blocking) {
    const Eigen::VectorXd wd = w * d;
    const Eigen::VectorXd wy = w * y;
    double best = std::numeric_limits<double>::infinity();
    blocking = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (wd[i] <= 1e-14 * d.norm() * w.row(i).norm() || in_tight(i)) continue;
      const double t = std::max(0.0, b[i] - wy[i]) / wd[i];
      if (t < best) {
        best = t;
        blocking = i;
      }
    }
    return best;
  };

  // Climb from the boundary point to a vertex, growing |y| along the null
  // space of the tight constraints.
  while (tight.size() < 6) {
    Eigen::Matrix<double, Eigen::Dynamic, 6> a(static_cast<Eigen::Index>(tight.size()), 6);
    for (std::size_t k = 0; k < tight.size(); ++k) a.row(static_cast<Eigen::Index>(k)) = w.row(tight[k]);
    Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 6>> svd(a, Eigen::ComputeFullV);
    const Eigen::Index rank = svd.rank();
    if (rank < static_cast<Eigen::Index>(tight.size())) return Wrench(y.normalized());
    const Eigen::MatrixXd null = svd.matrixV().rightCols(6 - rank);
    Wrench d = null * (null.transpose() * y);
    if (d.norm() < 1e-12 * y.norm()) d = null.col(0);
    Eigen::Index blocking = -1;
    const double t = ratio_test(d, blocking);
    if (blocking < 0) return std::nullopt;
    y += t * d;
    tight.push_back(blocking);
  }

  for (int step = 0; step < max_steps; ++step) {
    Eigen::Matrix<double, 6, 6> a;
    for (int k = 0; k < 6; ++k) a.row(k) = w.row(tight[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(a);
    if (!lu.isInvertible()) break;
    const Eigen::Matrix<double, 6, 6> inv = lu.inverse();
    double best_norm = y.squaredNorm();
    int leave = -1;
    Eigen::Index enter = -1;
    Wrench next = y;
    for (int k = 0; k < 6; ++k) {
      const Wrench d = -inv.col(k);
      Eigen::Index blocking = -1;
      const double t = ratio_test(d, blocking);
      if (blocking < 0) return std::nullopt;  // unbounded edge
      const Wrench candidate = y + t * d;
      if (candidate.squaredNorm() > best_norm * (1.0 + 1e-12)) {
        best_norm = candidate.squaredNorm();
        leave = k;
        enter = blocking;
        next = candidate;
      }
    }
    if (leave < 0) break;
    tight[static_cast<std::size_t>(leave)] = enter;
    y = next;
  }
  return Wrench(y.normalized());
}

}  // namespace detail

/// Radius of the largest origin-centred ball inside the wrench hull:
/// min over unit u of max_i w_i.u, clamped at 0. Sampled over low-discrepancy
/// directions, then refined by a facet walk from the best candidates. Every
/// evaluated direction yields an upper bound, so the estimate never
/// undershoots the true value by more than round-off.
inline double epsilon_metric(const WrenchSet& ws, int n_dirs = 4096, int refine_iters = 50, std::uint64_t seed = 0) {
  if (ws.primitives.empty()) throw Error(ErrorKind::InvalidArgument, "epsilon_metric: empty wrench set");
  if (n_dirs < 1) throw Error(ErrorKind::InvalidArgument, "epsilon_metric: need at least one direction");
  const auto w = detail::primitive_matrix(ws);
  auto support = [&](const Wrench& u) { return (w * u).maxCoeff(); };

  const auto dirs = detail::sphere_directions(n_dirs, seed);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) scored.emplace_back(support(dirs[i]), i);
  constexpr std::size_t kStarts = 16;
  const std::size_t starts = std::min(kStarts, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(starts), scored.end());
  double best = scored.front().first;
  if (best <= 0.0) return 0.0;

  // Tiny seeded perturbation of the facet offsets breaks ties between
  // coplanar primitives so the walk never stalls on degenerate vertices.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd b(w.rows());
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 1.0 + 1e-10 * unif(rng);

  for (std::size_t k = 0; k < starts; ++k) {
    const auto facet = detail::polar_vertex_walk(w, b, dirs[scored[k].second], refine_iters);
    if (!facet) return 0.0;
    best = std::min(best, support(*facet));
  }
  return std::max(best, 0.0);
}

namespace detail {

/// Wolfe's nearest-point algorithm: is `x` within `tol` of conv(points)?
inline bool hull_contains(const std::vector<Wrench>& points, const Wrench& x, double tol = 1e-9,
                          int max_iters = 1000) {
  const std::size_t n = points.size();
  std::vector<Wrench> p(n);
  double scale = 0.0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = points[i] - x;
    scale = std::max(scale, p[i].squaredNorm());
    if (p[i].squaredNorm() < p[start].squaredNorm()) start = i;
  }
  std::vector<std::size_t> support = {start};
  std::vector<double> lambda = {1.0};
  Wrench y = p[start];

  auto affine_min = [&](std::vector<double>& alpha) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        m(i, j) = p[support[static_cast<std::size_t>(i)]].dot(p[support[static_cast<std::size_t>(j)]]);
      }
      m(i, k) = m(k, i) = 1.0;
    }
    rhs[k] = 1.0;
    const Eigen::VectorXd sol = m.colPivHouseholderQr().solve(rhs);
    alpha.assign(sol.data(), sol.data() + k);
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    if (y.norm() <= tol) return true;
    std::size_t j = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y.dot(p[i]);
      if (d < lowest) {
        lowest = d;
        j = i;
      }
    }
    if (lowest > 0.0) return false;  // hyperplane normal to y separates x
    if (y.squaredNorm() - lowest <= 1e-12 * scale) return false;
    if (std::find(support.begin(), support.end(), j) != support.end()) return false;
    support.push_back(j);
    lambda.push_back(0.0);

    while (true) {
      std::vector<double> alpha;
      affine_min(alpha);
      bool positive = true;
      for (double a : alpha) positive = positive && a > 1e-14;
      if (positive) {
        lambda = alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 1e-14 && lambda[i] - alpha[i] > 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - alpha[i]));
      }
      std::vector<std::size_t> kept;
      std::vector<double> kept_lambda;
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double l = (1.0 - theta) * lambda[i] + theta * alpha[i];
        if (l > 1e-14) {
          kept.push_back(support[i]);
          kept_lambda.push_back(l);
        }
      }
      if (kept.size() == support.size()) {
        // No weight vanished numerically; drop the most negative coefficient.
        const auto worst = static_cast<std::size_t>(std::min_element(alpha.begin(), alpha.end()) - alpha.begin());
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(worst));
        kept_lambda.erase(kept_lambda.begin() + static_cast<std::ptrdiff_t>(worst));
      }
      if (kept.empty()) return false;
      const double total = std::accumulate(kept_lambda.begin(), kept_lambda.end(), 0.0);
      for (auto& l : kept_lambda) l /= total;
      support = std::move(kept);
      lambda = std::move(kept_lambda);
      if (support.size() == 1) break;
    }
    y.setZero();
    for (std::size_t i = 0; i < support.size(); ++i) y += lambda[i] * p[support[i]];
  }
  return y.norm() <= tol;
}

}  // namespace detail

struct VolumeEstimate {
  double volume = 0.0;
  double std_error = 0.0;
  int samples = 0;
  int hits = 0;
};

/// Monte Carlo volume of the 6-D wrench hull: uniform samples in the
/// primitives' bounding box tested for hull membership.
inline VolumeEstimate volume_metric(const WrenchSet& ws, int n_samples = 200000, std::uint64_t seed = 0) {
  VolumeEstimate out;
  out.samples = n_samples;
  if (ws.primitives.size() < 7 || n_samples < 1) return out;

  // A hull spanning fewer than 6 affine dimensions has zero volume.
  Wrench mean = Wrench::Zero();
  for (const auto& w : ws.primitives) mean += w;
  mean /= static_cast<double>(ws.primitives.size());
  Eigen::Matrix<double, Eigen::Dynamic, 6> centered(static_cast<Eigen::Index>(ws.primitives.size()), 6);
  for (std::size_t i = 0; i < ws.primitives.size(); ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (ws.primitives[i] - mean).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 6>> svd(centered);
  const auto sv = svd.singularValues();
  if (!(sv[5] > 1e-9 * sv[0])) return out;

  Wrench lo = ws.primitives.front(), hi = ws.primitives.front();
  for (const auto& w : ws.primitives) {
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  const Wrench extent = hi - lo;
  const double box_volume = extent.prod();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < n_samples; ++s) {
    Wrench x;
    for (int k = 0; k < 6; ++k) x[k] = lo[k] + unif(rng) * extent[k];
    if (detail::hull_contains(ws.primitives, x)) ++out.hits;
  }
  const double frac = static_cast<double>(out.hits) / n_samples;
  out.volume = box_volume * frac;
  out.std_error = box_volume * std::sqrt(frac * (1.0 - frac) / n_samples);
  return out;
}

/// G = gamma_palm * sqrt(N_p) * |(epsilon, v)|, gamma_palm = 3 with palm contact, 1 otherwise.
inline double grasp_score(double epsilon, double volume, int n_phalanges, bool palm_contact) {
  if (!(epsilon >= 0.0) || !(volume >= 0.0) || n_phalanges < 0) {
    throw Error(ErrorKind::InvalidArgument, "grasp_score: inputs must be non-negative");
  }
  const double gamma_palm = palm_contact ? 3.0 : 1.0;
  return gamma_palm * std::sqrt(static_cast<double>(n_phalanges)) * std::hypot(epsilon, volume);
}

struct PhalanxContacts {
  int n_phalanges = 0;
  bool palm_contact = false;
};

/// A part is in contact when any of its vertices is within `delta` of the surface.
inline PhalanxContacts count_phalanges(const TriMesh& hand, const Bvh& obj_bvh, const HandAnnotation& annotation,
                                       double delta) {
  if (annotation.phalanges.size() != HandAnnotation::kNumPhalanges) {
    throw Error(ErrorKind::InvalidArgument, "annotation must list " + std::to_string(HandAnnotation::kNumPhalanges) +
                                                " phalanx vertex sets, got " +
                                                std::to_string(annotation.phalanges.size()));
  }
  annotation.validate(hand.num_vertices());
  auto touching = [&](const std::vector<int>& set) {
    return std::any_of(set.begin(), set.end(), [&](int v) {
      return obj_bvh.closest_point(hand.vertex(v)).distance <= delta;
    });
  };
  PhalanxContacts out;
  for (const auto& part : annotation.phalanges) out.n_phalanges += touching(part) ? 1 : 0;
  out.palm_contact = touching(annotation.palm);
  return out;
}

inline PhalanxContacts count_phalanges(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                                       double delta = 0.003) {
  return count_phalanges(hand, Bvh(obj), annotation, delta);
}

/// Full grasp-quality evaluation; torques normalised by the object's max
/// radius about its centre of mass.
inline GraspQuality evaluate_grasp(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                                   const GraspParams& params = {}) {
  const auto mass = mass_properties(obj, 1.0);
  double radius = 0.0;
  for (const auto& v : obj.vertices()) radius = std::max(radius, (v - mass.com).norm());
  const Bvh bvh(obj);
  const auto contacts = extract_contacts(hand, bvh, params.delta);

  GraspQuality q;
  q.n_contacts = contacts.size();
  if (!contacts.empty()) {
    const auto ws = wrench_primitives(contacts, params.mu, params.cone_edges, mass.com, radius);
    q.epsilon = epsilon_metric(ws, params.n_dirs, params.refine_iters, params.seed);
    const auto vol = volume_metric(ws, params.n_samples, params.seed);
    q.volume_v = vol.volume;
    q.volume_std_error = vol.std_error;
  }
  const auto parts = count_phalanges(hand, bvh, annotation, params.delta);
  q.n_phalanges = parts.n_phalanges;
  q.palm_contact = parts.palm_contact;
  q.score_g = grasp_score(q.epsilon, q.volume_v, q.n_phalanges, q.palm_contact);
  return q;
}

}  // namespace handobj
