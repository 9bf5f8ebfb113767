#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "gfp/losses.hpp"
#include "gfp/registration.hpp"
#include "gfp/rng.hpp"
#include "gfp/synthetic.hpp"

using namespace gfp;

namespace {

PointCloud random_blob(Rng& rng, std::size_t n) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(rng.normal() * 0.4, rng.normal() * 0.25, rng.normal() * 0.6);
  return c;
}

RigidTransform random_transform(Rng& rng, double max_angle_deg, double max_trans,
                                double scale_lo, double scale_hi) {
  RigidTransform t;
  const Vec3 axis = rng.unit_vector();
  const double angle = rng.uniform(0.0, max_angle_deg * M_PI / 180.0);
  t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  t.translation = Vec3(rng.uniform(-max_trans, max_trans), rng.uniform(-max_trans, max_trans),
                       rng.uniform(-max_trans, max_trans));
  t.scale = rng.uniform(scale_lo, scale_hi);
  return t;
}

double rotation_error_deg(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a * b.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("umeyama recovers an exact similarity transform") {
  Rng rng(21);
  const PointCloud src = random_blob(rng, 60);
  const RigidTransform truth = random_transform(rng, 60, 0.5, 0.7, 1.4);
  const PointCloud dst = apply_transform(src, truth);
  const RigidTransform fit = umeyama_fit(src.points, dst.points);
  CHECK(rotation_error_deg(fit.rotation, truth.rotation) <= 1e-9);
  CHECK((fit.translation - truth.translation).norm() <= 1e-9);
  CHECK(std::abs(fit.scale - truth.scale) <= 1e-12);
}

TEST_CASE("icp on identical clouds returns identity") {
  Rng rng(22);
  const PointCloud c = random_blob(rng, 200);
  const IcpResult r = icp_register(c, c);
  CHECK(r.rmse < 1e-9);
  CHECK(rotation_error_deg(r.transform.rotation, Mat3::Identity()) <= 1e-6);
  CHECK(r.transform.translation.norm() <= 1e-9);
  CHECK(std::abs(r.transform.scale - 1.0) <= 1e-9);
}

TEST_CASE("icp recovers known rigid + scale transforms") {
  Rng rng(23);
  const PointCloud src = random_blob(rng, 300);
  const RigidTransform truth = random_transform(rng, 20, 0.3, 0.8, 1.25);
  const PointCloud dst = apply_transform(src, truth);
  const IcpResult r = icp_register(src, dst);
  CHECK(rotation_error_deg(r.transform.rotation, truth.rotation) < 0.5);
  CHECK((r.transform.translation - truth.translation).norm() < 1e-3);
  CHECK(std::abs(r.transform.scale - truth.scale) < 1e-3);
}

TEST_CASE("icp rmse history is non-increasing") {
  Rng rng(24);
  for (int rep = 0; rep < 5; ++rep) {
    const PointCloud src = random_blob(rng, 250);
    const RigidTransform truth = random_transform(rng, 25, 0.3, 0.85, 1.2);
    const PointCloud dst = apply_transform(src, truth);
    const IcpResult r = icp_register(src, dst);
    for (std::size_t i = 1; i < r.rmse_history.size(); ++i)
      CHECK(r.rmse_history[i] <= r.rmse_history[i - 1] + 1e-12);
  }
}

TEST_CASE("icp converges on partial overlap") {
  // target = front half of the transformed source; half-crops bias the
  // centroid/scale initialization, so the residual floor tracks the sampling
  // density and the pose offset stays moderate (the full-overlap recovery
  // test above exercises the larger transforms)
  Rng rng(25);
  PointCloud src = fibonacci_sphere(3000, 0.25);
  for (Vec3& p : src.points) {
    const double bump = 1.0 + 0.2 * std::sin(6.3 * p.x() / 0.25) * std::cos(7.1 * p.y() / 0.25);
    p *= bump;
  }
  const RigidTransform truth = random_transform(rng, 10, 0.1, 0.97, 1.06);
  PointCloud full = apply_transform(src, truth);
  PointCloud half;
  const Vec3 c = centroid(full);
  for (const Vec3& p : full.points)
    if (p.z() >= c.z()) half.points.push_back(p);
  REQUIRE(half.size() >= full.size() * 0.4);

  IcpParams params;
  params.max_iters = 150;
  const IcpResult r = icp_register(src, half, params);
  // rmse over the overlapping region (correspondences run target -> source)
  CHECK(r.rmse < 1e-2);
}

TEST_CASE("icp rejects degenerate targets and tiny clouds") {
  PointCloud line;
  for (int i = 0; i < 20; ++i) line.points.emplace_back(i * 0.1, 0, 0);
  Rng rng(26);
  const PointCloud blob = random_blob(rng, 50);
  CHECK_THROWS_WITH_AS(icp_register(blob, line), "degenerate geometry", std::invalid_argument);
  PointCloud tiny;
  for (int i = 0; i < 5; ++i) tiny.points.emplace_back(i, i, 0);
  CHECK_THROWS_AS(icp_register(tiny, blob), std::invalid_argument);
}

TEST_CASE("registering the gp onto itself is a fixed point") {
  GenericPrimitive gp;
  gp.class_name = "sphere";
  gp.cloud = fibonacci_sphere(500, 0.3);
  const PointCloud out = register_gp(gp, gp.cloud);
  CHECK(chamfer(out, gp.cloud) < 1e-6);
}

TEST_CASE("registration onto a scaled half view stays close to the full shape") {
  Rng rng(27);
  GenericPrimitive gp;
  gp.cloud = fibonacci_sphere(800, 0.28867513459481287);  // unit bounding diagonal

  const RigidTransform truth = random_transform(rng, 30, 0.2, 1.3, 1.3);
  const PointCloud full = apply_transform(gp.cloud, truth);
  PointCloud half;
  const Vec3 c = centroid(full);
  for (const Vec3& p : full.points)
    if (p.x() >= c.x()) half.points.push_back(p);

  const PointCloud registered = register_gp(gp, half);
  CHECK(chamfer(registered, full) / truth.scale < 0.05);
}

TEST_CASE("registration is equivariant to rigid pre-transforms of the observation") {
  Rng rng(28);
  GenericPrimitive gp;
  gp.cloud = fibonacci_sphere(600, 0.25);
  for (Vec3& p : gp.cloud.points) {
    const double bump = 1.0 + 0.3 * std::sin(6.3 * p.x() / 0.25) * std::cos(7.1 * p.y() / 0.25);
    p *= bump;
  }
  PointCloud obs = apply_transform(gp.cloud, random_transform(rng, 10, 0.1, 1.1, 1.1));
  obs.points.resize(obs.size() * 3 / 4);  // make it partial

  const PointCloud reg_a = register_gp(gp, obs);
  const RigidTransform t = random_transform(rng, 40, 0.5, 1.0, 1.0);
  const PointCloud reg_b = register_gp(gp, apply_transform(obs, t));
  const PointCloud expected = apply_transform(reg_a, t);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    max_dev = std::max(max_dev, (reg_b.points[i] - expected.points[i]).norm());
  CHECK(max_dev <= 1e-3);
}
