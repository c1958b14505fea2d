#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "handobj/handobj.hpp"
#include "support/contact_fixtures.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace handobj;
namespace fx = handobj::fixtures;
namespace orc = handobj::oracles;

namespace {

template <typename F>
ErrorKind kind_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorKind::Io;
}

constexpr double kGradTol = 1e-4;
constexpr int kGradCases = 20;

Eigen::VectorXd stack(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Eigen::VectorXd out(3 * static_cast<Eigen::Index>(a.size() + b.size()));
  out << orc::flatten(a), orc::flatten(b);
  return out;
}

/// Relative error of a pairwise contact loss gradient over hand and object coordinates.
template <typename LossFn>
double contact_gradient_error(const fx::ContactCase& c, LossFn&& loss) {
  const LossValue analytic = loss(c.hand, c.obj);
  const auto nh = c.hand.num_vertices(), no = c.obj.num_vertices();
  auto f = [&](const Eigen::VectorXd& x) {
    const TriMesh h = c.hand.with_vertices(orc::unflatten(x, 0, nh));
    const TriMesh o = c.obj.with_vertices(orc::unflatten(x, 3 * static_cast<Eigen::Index>(nh), no));
    return loss(h, o).value;
  };
  const Eigen::VectorXd fd = orc::finite_difference(f, stack(c.hand.vertices(), c.obj.vertices()));
  return orc::relative_error(stack(analytic.gradient_hand, analytic.gradient_obj), fd);
}

}  // namespace

TEST(Penalize, Examples) {
  const auto p0 = penalize(0.0, 0.3);
  EXPECT_EQ(p0.value, 0.0);
  EXPECT_EQ(p0.derivative, 1.0);
  EXPECT_NEAR(penalize(1.0, 0.02).value, 0.02, 1e-15);
  EXPECT_NEAR(penalize(0.01, 0.01).value, 0.01 * std::tanh(1.0), 1e-18);
  const double sech = 1.0 / std::cosh(0.5);
  EXPECT_NEAR(penalize(0.01, 0.02).derivative, sech * sech, 1e-15);
  EXPECT_EQ(kind_of([] { penalize(-1e-9, 0.01); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { penalize(0.1, 0.0); }), ErrorKind::InvalidArgument);
}

TEST(Penalize, BoundsAndMonotoneSweep) {
  for (double alpha : {0.01, 0.02, 1.0}) {
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = alpha * 20.0 * i / 999.0;
      const double v = penalize(x, alpha).value;
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, alpha);
      EXPECT_LE(v, x);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Repulsion, DisjointIsZero) {
  const auto hand = fx::sphere(1, 0.02, Vec3(0.5, 0, 0));
  const auto obj = fx::sphere(2, 0.05);
  const auto l = repulsion_loss(hand, obj, ContactParams{});
  EXPECT_EQ(l.value, 0.0);
  for (const auto& g : l.gradient_hand) EXPECT_EQ(g, Vec3::Zero());
  for (const auto& g : l.gradient_obj) EXPECT_EQ(g, Vec3::Zero());
}

TEST(Repulsion, SingleInteriorVertex) {
  // Hand triangle with one vertex inside a cube, 0.005 from the nearest corner.
  const auto obj = fx::cube(0.05);
  const Vec3 corner(0.05, 0.05, 0.05);
  const Vec3 inner = corner - Vec3(0.003, 0.004, 0.0) - Vec3(0, 0, 1e-9);
  const double d = (inner - corner).norm();
  const TriMesh hand({inner, Vec3(0.2, 0.2, 0.2), Vec3(0.2, 0.3, 0.2)}, {{0, 1, 2}});
  const auto l = repulsion_loss(hand, obj, ContactParams{});
  EXPECT_NEAR(d, 0.005, 1e-8);
  EXPECT_NEAR(l.value, 0.02 * std::tanh(d / 0.02), 1e-15);
}

TEST(Repulsion, RequiresWatertightObject) {
  const auto hand = fx::sphere(1, 0.02);
  EXPECT_EQ(kind_of([&] { repulsion_loss(hand, fx::open_cylinder(0.05, 0.1, 8, 2), ContactParams{}); }),
            ErrorKind::Geometry);
}

TEST(Repulsion, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(101);
  const ContactParams params;
  for (int k = 0; k < kGradCases; ++k) {
    const auto c = fx::random_contact_case(rng, 0.002, 0.015);
    const auto loss = [&](const TriMesh& h, const TriMesh& o) { return repulsion_loss(h, o, params); };
    EXPECT_GT(loss(c.hand, c.obj).value, 0.0);
    EXPECT_LT(contact_gradient_error(c, loss), kGradTol) << "case " << k;
  }
}

TEST(Attraction, TouchingRegionsGiveZero) {
  // Regions are single vertices placed exactly on object vertices.
  const auto obj = fx::sphere(2, 0.05);
  std::vector<Vec3> hv;
  std::vector<Face> faces;
  HandAnnotation ann;
  for (int r = 0; r < 6; ++r) {
    const int base = static_cast<int>(hv.size());
    const Vec3 o = obj.vertex(r * 20);
    hv.push_back(o);
    hv.push_back(o * 1.5);
    hv.push_back(o * 1.5 + Vec3(0.01, 0.01, 0.01));
    faces.push_back({base, base + 1, base + 2});
    ann.regions.push_back({base});
  }
  const TriMesh hand(hv, faces);
  EXPECT_EQ(attraction_loss(hand, obj, ann, ContactParams{}).value, 0.0);
}

TEST(Attraction, SingleRegionGap) {
  const auto obj = fx::sphere(2, 0.05);
  std::vector<Vec3> hv;
  std::vector<Face> faces;
  HandAnnotation ann;
  for (int r = 0; r < 6; ++r) {
    const int base = static_cast<int>(hv.size());
    const Vec3 o = obj.vertex(r * 20);
    // Region 2 sits 0.01 outside its object vertex, radially.
    hv.push_back(r == 2 ? Vec3(o * (0.06 / 0.05)) : o);
    hv.push_back(o * 1.5);
    hv.push_back(o * 1.5 + Vec3(0.01, 0.01, 0.01));
    faces.push_back({base, base + 1, base + 2});
    ann.regions.push_back({base});
  }
  const TriMesh hand(hv, faces);
  const auto l = attraction_loss(hand, obj, ann, ContactParams{});
  EXPECT_NEAR(l.value, 0.01 * std::tanh(1.0), 1e-15);
}

TEST(Attraction, FullyInteriorRegionContributesZero) {
  const auto obj = fx::sphere(3, 0.05);
  const auto hand = fx::sphere(1, 0.01);  // entirely inside
  HandAnnotation ann;
  ann.regions = {{0, 1, 2}, {3, 4}, {5}, {6}, {7}, {8}};
  const ContactGeometry geom(hand, obj);
  const auto gaps = region_gaps(ann, geom);
  for (const auto& g : gaps) {
    EXPECT_EQ(g.distance, 0.0);
    EXPECT_EQ(g.hand_vertex, -1);
  }
  EXPECT_EQ(attraction_loss(hand, obj, ann, ContactParams{}).value, 0.0);
}

TEST(Attraction, InvalidAnnotation) {
  const auto obj = fx::sphere(2, 0.05);
  const auto hand = fx::sphere(1, 0.01, Vec3(0.2, 0, 0));
  HandAnnotation bad;
  bad.regions = {{0, 1}, {1, 2}};
  EXPECT_EQ(kind_of([&] { attraction_loss(hand, obj, bad, ContactParams{}); }), ErrorKind::InvalidArgument);
  bad.regions = {{0, 1000}};
  EXPECT_EQ(kind_of([&] { attraction_loss(hand, obj, bad, ContactParams{}); }), ErrorKind::InvalidArgument);
}

TEST(Attraction, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(202);
  const ContactParams params;
  for (int k = 0; k < kGradCases; ++k) {
    // Hand centre 1-15 mm outside the surface: regions do not touch.
    const auto c = fx::random_contact_case(rng, -0.035, -0.021);
    const auto loss = [&](const TriMesh& h, const TriMesh& o) { return attraction_loss(h, o, c.annotation, params); };
    EXPECT_GT(loss(c.hand, c.obj).value, 0.0);
    EXPECT_LT(contact_gradient_error(c, loss), kGradTol) << "case " << k;
  }
}

TEST(Contact, EndpointsAndAffineMidpoint) {
  std::mt19937_64 rng(303);
  for (int k = 0; k < 5; ++k) {
    const auto c = fx::random_contact_case(rng, -0.01, 0.01);
    ContactParams p;
    p.lambda_r = 1.0;
    const auto l1 = contact_loss(c.hand, c.obj, c.annotation, p);
    p.lambda_r = 0.0;
    const auto l0 = contact_loss(c.hand, c.obj, c.annotation, p);
    p.lambda_r = 0.5;
    const auto lh = contact_loss(c.hand, c.obj, c.annotation, p);
    const auto rep = repulsion_loss(c.hand, c.obj, p);
    const auto att = attraction_loss(c.hand, c.obj, c.annotation, p);
    EXPECT_EQ(l1.value, rep.value);
    EXPECT_EQ(l0.value, att.value);
    EXPECT_EQ(l1.gradient_hand, rep.gradient_hand);
    EXPECT_EQ(l0.gradient_obj, att.gradient_obj);
    EXPECT_NEAR(lh.value, 0.5 * (l0.value + l1.value), 1e-12);
  }
}

TEST(Contact, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(404);
  for (int k = 0; k < kGradCases; ++k) {
    const auto c = fx::random_contact_case(rng, -0.012, 0.012);
    ContactParams params;
    params.lambda_r = 0.3;
    const auto loss = [&](const TriMesh& h, const TriMesh& o) { return contact_loss(h, o, c.annotation, params); };
    EXPECT_LT(contact_gradient_error(c, loss), kGradTol) << "case " << k;
  }
}

TEST(Contact, TranslationInvariant) {
  std::mt19937_64 rng(505);
  const auto c = fx::random_contact_case(rng, -0.01, 0.01);
  const Vec3 t(0.3, -1.2, 0.7);
  const ContactParams p;
  const double before = contact_loss(c.hand, c.obj, c.annotation, p).value;
  const double after = contact_loss(c.hand.translated(t), c.obj.translated(t), c.annotation, p).value;
  EXPECT_NEAR(before, after, 1e-10);
}

TEST(Contact, UniformScalingMatchesDirectRecomputation) {
  std::mt19937_64 rng(606);
  const auto c = fx::random_contact_case(rng, 0.0, 0.01);
  const ContactParams p;
  const double s = 1.7;
  const ContactGeometry geom(c.hand, c.obj);
  double expected_rep = 0.0;
  for (std::size_t i = 0; i < geom.interior.size(); ++i) {
    if (geom.interior[i]) expected_rep += p.r * std::tanh(s * geom.nearest[i].distance / p.r);
  }
  double expected_att = 0.0;
  for (const auto& g : region_gaps(c.annotation, geom)) {
    if (g.hand_vertex >= 0) expected_att += p.a * std::tanh(s * g.distance / p.a);
  }
  const auto hs = c.hand.scaled(s), os = c.obj.scaled(s);
  EXPECT_NEAR(repulsion_loss(hs, os, p).value, expected_rep, 1e-12);
  EXPECT_NEAR(attraction_loss(hs, os, c.annotation, p).value, expected_att, 1e-12);
}

TEST(Contact, InvalidParams) {
  ContactParams p;
  p.lambda_r = 1.5;
  EXPECT_EQ(kind_of([&] { p.validate(); }), ErrorKind::InvalidArgument);
  p = ContactParams{};
  p.r = 0.0;
  EXPECT_EQ(kind_of([&] { p.validate(); }), ErrorKind::InvalidArgument);
  p = ContactParams{};
  p.mu_c = -1;
  EXPECT_EQ(kind_of([&] { p.validate(); }), ErrorKind::InvalidArgument);
}

TEST(EdgeLoss, RegularIcosahedronIsZero) {
  EXPECT_NEAR(edge_loss(icosphere(0)).value, 0.0, 1e-15);
}

TEST(EdgeLoss, FormulaExamples) {
  // Squared lengths with mean 1.6: (4 |1 - 1.6| + |4 - 1.6|) / 5.
  EXPECT_NEAR(edge_regularizer_value({1, 1, 1, 1, 4}), 0.96, 1e-15);
  // Unit square split by a diagonal: squared lengths {1, 1, 1, 1, 2}, mean 1.2.
  const TriMesh square({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}});
  EXPECT_NEAR(edge_loss(square).value, (4 * 0.2 + 0.8) / 5.0, 1e-15);
  EXPECT_EQ(kind_of([] { edge_regularizer_value({}); }), ErrorKind::Geometry);
}

TEST(EdgeLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(707);
  int done = 0;
  while (done < kGradCases) {
    const auto m = fx::jittered(icosphere(2), 0.02, rng);
    // Skip meshes with an edge too close to the mean squared length.
    const auto lengths = edge_lengths(m);
    double mean = 0.0;
    for (const auto& e : lengths) mean += e.length * e.length;
    mean /= static_cast<double>(lengths.size());
    double margin = 1e9;
    for (const auto& e : lengths) margin = std::min(margin, std::abs(e.length * e.length - mean));
    if (margin < 1e-4 * mean) continue;
    const auto analytic = edge_loss(m);
    auto f = [&](const Eigen::VectorXd& x) { return edge_loss(m.with_vertices(orc::unflatten(x, 0, m.num_vertices()))).value; };
    const auto fd = orc::finite_difference(f, orc::flatten(m.vertices()));
    EXPECT_LT(orc::relative_error(orc::flatten(analytic.gradient), fd), kGradTol);
    ++done;
  }
}

TEST(LaplacianLoss, FlatGridInteriorIsZero) {
  const auto grid = fx::flat_grid(6, 0.01);
  const auto norms = laplacian_norms(grid);
  // Interior vertices have the symmetric 6-neighbourhood of this triangulation.
  for (int j = 1; j < 5; ++j)
    for (int i = 1; i < 5; ++i) EXPECT_LT(norms[static_cast<std::size_t>(j * 6 + i)], 1e-17);
}

TEST(LaplacianLoss, IcospherePositive) {
  const auto m = icosphere(3);
  EXPECT_GT(laplacian_loss(m).value, 0.0);
  for (double n : laplacian_norms(m)) EXPECT_GT(n, 0.0);
}

TEST(LaplacianLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(808);
  for (int k = 0; k < kGradCases; ++k) {
    const auto m = fx::jittered(icosphere(2), 0.02, rng);
    const auto analytic = laplacian_loss(m);
    auto f = [&](const Eigen::VectorXd& x) {
      return laplacian_loss(m.with_vertices(orc::unflatten(x, 0, m.num_vertices()))).value;
    };
    const auto fd = orc::finite_difference(f, orc::flatten(m.vertices()));
    EXPECT_LT(orc::relative_error(orc::flatten(analytic.gradient), fd), kGradTol);
  }
}

TEST(LaplacianLoss, IsolatedVertexErrors) {
  const TriMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {4, 4, 4}}, {{0, 1, 2}});
  EXPECT_EQ(kind_of([&] { laplacian_loss(m); }), ErrorKind::Geometry);
}

TEST(Chamfer, Examples) {
  const std::vector<Vec3> a = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}};
  EXPECT_EQ(chamfer(a, a).value, 0.0);
  EXPECT_NEAR(chamfer(std::vector<Vec3>{{0, 0, 0}}, std::vector<Vec3>{{0.3, 0.4, 0}}).value, 0.25, 1e-16);
  EXPECT_EQ(kind_of([&] { chamfer(a, std::vector<Vec3>{}); }), ErrorKind::InvalidArgument);
}

TEST(Chamfer, MatchesBruteForceAndIsSymmetric) {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 3; ++k) {
    std::vector<Vec3> a(500), b(500);
    for (auto& p : a) p = Vec3(u(rng), u(rng), u(rng));
    for (auto& p : b) p = Vec3(u(rng), u(rng), u(rng));
    const double fast = chamfer(a, b).value;
    EXPECT_NEAR(fast, orc::brute_chamfer(a, b), 1e-12 * fast);
    EXPECT_EQ(fast, chamfer(b, a).value);
  }
}

TEST(Chamfer, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(-1, 1);
  int done = 0;
  while (done < kGradCases) {
    std::vector<Vec3> a(40), b(50);
    for (auto& p : a) p = Vec3(u(rng), u(rng), u(rng));
    for (auto& p : b) p = Vec3(u(rng), u(rng), u(rng));
    if (fx::nearest_margin(a, b) < 1e-4 || fx::nearest_margin(b, a) < 1e-4) continue;
    const auto analytic = chamfer(a, b);
    auto f = [&](const Eigen::VectorXd& x) {
      return chamfer(orc::unflatten(x, 0, a.size()), orc::unflatten(x, 3 * static_cast<Eigen::Index>(a.size()), b.size())).value;
    };
    const auto fd = orc::finite_difference(f, stack(a, b));
    EXPECT_LT(orc::relative_error(stack(analytic.gradient_a, analytic.gradient_b), fd), kGradTol);
    ++done;
  }
}

TEST(TranslationScale, Examples) {
  auto l = translation_scale_loss(Vec3(0.1, 0.2, 0.3), 1.0, Vec3(0.1, 0.2, 0.3), 1.0);
  EXPECT_EQ(l.translation, 0.0);
  EXPECT_EQ(l.scale, 0.0);
  l = translation_scale_loss(Vec3(0.01, 0, 0), 1.0, Vec3::Zero(), 1.0);
  EXPECT_NEAR(l.translation, 1e-4, 1e-18);
  l = translation_scale_loss(Vec3::Zero(), 1.1, Vec3::Zero(), 1.0);
  EXPECT_NEAR(l.scale, 0.01, 1e-15);
  EXPECT_EQ(kind_of([] { translation_scale_loss(Vec3::Zero(), 0.0, Vec3::Zero(), 1.0); }), ErrorKind::InvalidArgument);
}
