#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "handobj/mesh.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

/// Weights and characteristic distances of the contact objective (meters).
struct ContactParams {
  double lambda_r = 0.5;  // repulsion share of the contact loss
  double r = 0.02;        // repulsion characteristic distance
  double a = 0.01;        // attraction characteristic distance
  double mu_c = 10.0;     // contact loss weight

  void validate() const {
    if (!(lambda_r >= 0.0 && lambda_r <= 1.0)) throw Error(ErrorKind::InvalidArgument, "lambda_r must lie in [0, 1]");
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "repulsion distance r must be positive");
    if (!(a > 0.0)) throw Error(ErrorKind::InvalidArgument, "attraction distance a must be positive");
    if (!(mu_c >= 0.0)) throw Error(ErrorKind::InvalidArgument, "mu_c must be non-negative");
  }
};

/// Mesh-regulariser weights applied to object predictions.
inline constexpr double kEdgeLossWeight = 2.0;
inline constexpr double kLaplacianLossWeight = 0.1;

/// Vertex sets over a hand mesh: contact regions, palm and the 16 rigid parts.
struct HandAnnotation {
  std::vector<std::vector<int>> regions;
  std::vector<int> palm;
  std::vector<std::vector<int>> phalanges;

  static constexpr std::size_t kNumRegions = 6;
  static constexpr std::size_t kNumPhalanges = 16;

  /// Indices in range and regions pairwise disjoint.
  void validate(std::size_t num_vertices) const {
    auto check = [&](const std::vector<int>& set, const std::string& what) {
      for (int i : set) {
        if (i < 0 || static_cast<std::size_t>(i) >= num_vertices) {
          throw Error(ErrorKind::InvalidArgument, "annotation " + what + ": vertex index " + std::to_string(i) +
                                                      " out of range (" + std::to_string(num_vertices) + " vertices)");
        }
      }
    };
    std::vector<int> owner(num_vertices, -1);
    for (std::size_t r = 0; r < regions.size(); ++r) {
      check(regions[r], "region " + std::to_string(r));
      for (int i : regions[r]) {
        auto& o = owner[static_cast<std::size_t>(i)];
        if (o >= 0 && o != static_cast<int>(r)) {
          throw Error(ErrorKind::InvalidArgument, "annotation regions " + std::to_string(o) + " and " +
                                                      std::to_string(r) + " share vertex " + std::to_string(i));
        }
        o = static_cast<int>(r);
      }
    }
    check(palm, "palm");
    for (std::size_t p = 0; p < phalanges.size(); ++p) check(phalanges[p], "phalanx " + std::to_string(p));
  }
};

/// Loss value with gradients w.r.t. hand and object vertex positions.
struct LossValue {
  double value = 0.0;
  std::vector<Vec3> gradient_hand;
  std::vector<Vec3> gradient_obj;

  static LossValue zeros(std::size_t n_hand, std::size_t n_obj) {
    return {0.0, std::vector<Vec3>(n_hand, Vec3::Zero()), std::vector<Vec3>(n_obj, Vec3::Zero())};
  }
};

/// Single-mesh loss (regularisers) with its vertex gradient.
struct MeshLoss {
  double value = 0.0;
  std::vector<Vec3> gradient;
};

/// Loss between two point clouds with gradients w.r.t. both.
struct CloudLoss {
  double value = 0.0;
  std::vector<Vec3> gradient_a;
  std::vector<Vec3> gradient_b;
};

// ---------------------------------------------------------------------------
// Penalisation l_alpha(x) = alpha * tanh(x / alpha)

struct Penalty {
  double value;
  double derivative;
};

inline Penalty penalize(double x, double alpha) {
  if (!(x >= 0.0)) throw Error(ErrorKind::InvalidArgument, "penalize: distance must be non-negative");
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "penalize: alpha must be positive");
  const double th = std::tanh(x / alpha);
  // tanh rounds to 1 past x / alpha ~ 19; keep the value strictly below alpha.
  return {std::min(alpha * th, std::nextafter(alpha, 0.0)), 1.0 - th * th};
}

// ---------------------------------------------------------------------------
// Contact losses

/// Interior classification and nearest object vertex for every hand vertex.
/// Losses treat both as constants when differentiating.
struct ContactGeometry {
  std::vector<bool> interior;
  std::vector<VertexHit> nearest;  // nearest object vertex per hand vertex

  ContactGeometry(const TriMesh& hand, const TriMesh& obj)
      : ContactGeometry(hand, obj, InsideTester(obj)) {}

  ContactGeometry(const TriMesh& hand, const TriMesh& obj, const InsideTester& solid) {
    interior = classify_points(hand.vertices(), solid);
    const PointTree tree(obj.vertices());
    nearest.reserve(hand.num_vertices());
    for (const auto& v : hand.vertices()) nearest.push_back(tree.nearest(v));
  }
};

namespace detail {

/// Adds the gradient of l_alpha(|v - w|) to the hand vertex and the object vertex.
inline void accumulate_pair(LossValue& out, const TriMesh& hand, const TriMesh& obj, int hv, int ov,
                            double distance, double slope) {
  if (distance <= 0.0) return;  // subgradient 0 at coincidence
  const Vec3 g = slope * (hand.vertex(hv) - obj.vertex(ov)) / distance;
  out.gradient_hand[static_cast<std::size_t>(hv)] += g;
  out.gradient_obj[static_cast<std::size_t>(ov)] -= g;
}

}  // namespace detail

inline LossValue repulsion_loss(const TriMesh& hand, const TriMesh& obj, const ContactGeometry& geom,
                                const ContactParams& params) {
  LossValue out = LossValue::zeros(hand.num_vertices(), obj.num_vertices());
  for (std::size_t i = 0; i < hand.num_vertices(); ++i) {
    if (!geom.interior[i]) continue;
    const auto& hit = geom.nearest[i];
    const Penalty pen = penalize(hit.distance, params.r);
    out.value += pen.value;
    detail::accumulate_pair(out, hand, obj, static_cast<int>(i), hit.index, hit.distance, pen.derivative);
  }
  return out;
}

/// Sum over interior hand vertices of l_r(distance to the object's vertex set).
inline LossValue repulsion_loss(const TriMesh& hand, const TriMesh& obj, const ContactParams& params) {
  params.validate();
  return repulsion_loss(hand, obj, ContactGeometry(hand, obj), params);
}

struct RegionGap {
  double distance = 0.0;  // 0 when the whole region is interior
  int hand_vertex = -1;   // -1 when the whole region is interior
  int obj_vertex = -1;
};

/// Minimum vertex-set distance of each region's exterior vertices.
inline std::vector<RegionGap> region_gaps(const HandAnnotation& annotation, const ContactGeometry& geom) {
  std::vector<RegionGap> gaps;
  gaps.reserve(annotation.regions.size());
  for (const auto& region : annotation.regions) {
    std::vector<int> sorted = region;
    std::sort(sorted.begin(), sorted.end());
    RegionGap gap;
    double best = std::numeric_limits<double>::infinity();
    for (int v : sorted) {
      if (geom.interior[static_cast<std::size_t>(v)]) continue;
      const auto& hit = geom.nearest[static_cast<std::size_t>(v)];
      if (hit.distance < best) {
        best = hit.distance;
        gap = {hit.distance, v, hit.index};
      }
    }
    gaps.push_back(gap);
  }
  return gaps;
}

inline LossValue attraction_loss(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                                 const ContactGeometry& geom, const ContactParams& params) {
  LossValue out = LossValue::zeros(hand.num_vertices(), obj.num_vertices());
  for (const auto& gap : region_gaps(annotation, geom)) {
    if (gap.hand_vertex < 0) continue;  // fully interior region contributes nothing
    const Penalty pen = penalize(gap.distance, params.a);
    out.value += pen.value;
    detail::accumulate_pair(out, hand, obj, gap.hand_vertex, gap.obj_vertex, gap.distance, pen.derivative);
  }
  return out;
}

/// Sum over regions of l_a(distance from the region's exterior vertices to the object's vertex set).
inline LossValue attraction_loss(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                                 const ContactParams& params) {
  params.validate();
  annotation.validate(hand.num_vertices());
  return attraction_loss(hand, obj, annotation, ContactGeometry(hand, obj), params);
}

/// weight_a * a + weight_b * b, values and gradients.
inline LossValue combine(double weight_a, const LossValue& a, double weight_b, const LossValue& b) {
  LossValue out;
  out.value = weight_a * a.value + weight_b * b.value;
  out.gradient_hand.resize(a.gradient_hand.size());
  out.gradient_obj.resize(a.gradient_obj.size());
  for (std::size_t i = 0; i < a.gradient_hand.size(); ++i) {
    out.gradient_hand[i] = weight_a * a.gradient_hand[i] + weight_b * b.gradient_hand[i];
  }
  for (std::size_t i = 0; i < a.gradient_obj.size(); ++i) {
    out.gradient_obj[i] = weight_a * a.gradient_obj[i] + weight_b * b.gradient_obj[i];
  }
  return out;
}

struct ContactTerms {
  LossValue repulsion;
  LossValue attraction;
  LossValue contact;  // lambda_r * repulsion + (1 - lambda_r) * attraction
  std::vector<RegionGap> gaps;
  std::vector<bool> interior;
};

inline ContactTerms contact_terms(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                                  const ContactParams& params, const InsideTester& solid) {
  params.validate();
  annotation.validate(hand.num_vertices());
  const ContactGeometry geom(hand, obj, solid);
  ContactTerms terms;
  terms.repulsion = repulsion_loss(hand, obj, geom, params);
  terms.attraction = attraction_loss(hand, obj, annotation, geom, params);
  terms.contact = combine(params.lambda_r, terms.repulsion, 1.0 - params.lambda_r, terms.attraction);
  terms.gaps = region_gaps(annotation, geom);
  terms.interior = geom.interior;
  return terms;
}

inline LossValue contact_loss(const TriMesh& hand, const TriMesh& obj, const HandAnnotation& annotation,
                              const ContactParams& params) {
  return contact_terms(hand, obj, annotation, params, InsideTester(obj)).contact;
}

// ---------------------------------------------------------------------------
// Mesh regularisers

/// Mean absolute deviation of the squared edge lengths from their mean.
inline double edge_regularizer_value(const std::vector<double>& squared_lengths) {
  if (squared_lengths.empty()) throw Error(ErrorKind::Geometry, "edge loss: mesh has no edges");
  double mean = 0.0;
  for (double l2 : squared_lengths) mean += l2;
  mean /= static_cast<double>(squared_lengths.size());
  double sum = 0.0;
  for (double l2 : squared_lengths) sum += std::abs(l2 - mean);
  return sum / static_cast<double>(squared_lengths.size());
}

inline MeshLoss edge_loss(const TriMesh& mesh) {
  const auto edges = unique_edges(mesh);
  if (edges.empty()) throw Error(ErrorKind::Geometry, "edge loss: mesh has no edges");
  const auto n = static_cast<double>(edges.size());
  std::vector<double> sq;
  sq.reserve(edges.size());
  for (const auto& [a, b] : edges) sq.push_back((mesh.vertex(a) - mesh.vertex(b)).squaredNorm());

  MeshLoss out;
  out.value = edge_regularizer_value(sq);
  double mean = 0.0;
  for (double l2 : sq) mean += l2;
  mean /= n;
  // dL/dl2_e = (s_e - mean(s)) / n with s_e = sign(l2_e - mean), sign(0) = 0.
  std::vector<double> sign(edges.size());
  double sign_sum = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = sq[e] - mean;
    sign[e] = (d > 0.0) - (d < 0.0);
    sign_sum += sign[e];
  }
  out.gradient.assign(mesh.num_vertices(), Vec3::Zero());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = (sign[e] - sign_sum / n) / n;
    const auto [a, b] = edges[e];
    const Vec3 g = 2.0 * w * (mesh.vertex(a) - mesh.vertex(b));
    out.gradient[static_cast<std::size_t>(a)] += g;
    out.gradient[static_cast<std::size_t>(b)] -= g;
  }
  return out;
}

/// Mean over vertices of the norm of the uniform graph Laplacian of the positions.
inline MeshLoss laplacian_loss(const TriMesh& mesh) {
  const auto lap = graph_laplacian(mesh);
  const Eigen::MatrixX3d x = vertex_matrix(mesh);
  const Eigen::MatrixX3d delta = lap * x;
  const auto n = static_cast<double>(mesh.num_vertices());
  Eigen::MatrixX3d unit = Eigen::MatrixX3d::Zero(delta.rows(), 3);
  MeshLoss out;
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    const double norm = delta.row(i).norm();
    out.value += norm;
    if (norm > 0.0) unit.row(i) = delta.row(i) / norm;
  }
  out.value /= n;
  const Eigen::MatrixX3d grad = (lap.transpose() * unit) / n;
  out.gradient.resize(mesh.num_vertices());
  for (Eigen::Index i = 0; i < grad.rows(); ++i) out.gradient[static_cast<std::size_t>(i)] = grad.row(i).transpose();
  return out;
}

/// Per-vertex Laplacian norms ||(L V)_i||.
inline std::vector<double> laplacian_norms(const TriMesh& mesh) {
  const Eigen::MatrixX3d delta = graph_laplacian(mesh) * vertex_matrix(mesh);
  std::vector<double> out(static_cast<std::size_t>(delta.rows()));
  for (Eigen::Index i = 0; i < delta.rows(); ++i) out[static_cast<std::size_t>(i)] = delta.row(i).norm();
  return out;
}

// ---------------------------------------------------------------------------
// Chamfer

/// 0.5 * (sum_p min_q |p - q|^2 + sum_q min_p |q - p|^2), no averaging.
inline CloudLoss chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "chamfer: empty point cloud");
  CloudLoss out;
  out.gradient_a.assign(a.size(), Vec3::Zero());
  out.gradient_b.assign(b.size(), Vec3::Zero());
  double sum_ab = 0.0, sum_ba = 0.0;
  const PointTree tree_b(b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto hit = tree_b.nearest(a[i]);
    const Vec3 d = a[i] - b[static_cast<std::size_t>(hit.index)];
    sum_ab += d.squaredNorm();
    out.gradient_a[i] += d;
    out.gradient_b[static_cast<std::size_t>(hit.index)] -= d;
  }
  const PointTree tree_a(a);
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto hit = tree_a.nearest(b[j]);
    const Vec3 d = b[j] - a[static_cast<std::size_t>(hit.index)];
    sum_ba += d.squaredNorm();
    out.gradient_b[j] += d;
    out.gradient_a[static_cast<std::size_t>(hit.index)] -= d;
  }
  out.value = 0.5 * (sum_ab + sum_ba);
  return out;
}

inline CloudLoss chamfer(const PointCloud& a, const PointCloud& b) { return chamfer(a.points, b.points); }

// ---------------------------------------------------------------------------
// Hand-relative translation / scale

struct TranslationScaleLoss {
  double translation;  // |T - T_hat|^2
  double scale;        // (S - S_hat)^2
};

inline TranslationScaleLoss translation_scale_loss(const Vec3& predicted_t, double predicted_s, const Vec3& target_t,
                                                   double target_s) {
  if (!(predicted_s > 0.0) || !(target_s > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "translation_scale_loss: scales must be positive");
  }
  const double ds = target_s - predicted_s;
  return {(target_t - predicted_t).squaredNorm(), ds * ds};
}

}  // namespace handobj
