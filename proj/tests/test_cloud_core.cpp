#include <doctest.h>

#include <cmath>

#include "gfp/kdtree.hpp"
#include "gfp/normals.hpp"
#include "gfp/point_cloud.hpp"
#include "gfp/rng.hpp"
#include "gfp/selftest.hpp"
#include "gfp/synthetic.hpp"

using namespace gfp;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 1.0) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent));
  return c;
}

}  // namespace

TEST_CASE("index construction rejects an empty cloud") {
  PointCloud empty;
  CHECK_THROWS_WITH_AS(SpatialIndex{empty}, "empty cloud", std::invalid_argument);
}

TEST_CASE("single point cloud answers any query") {
  PointCloud c;
  c.points.emplace_back(0, 0, 0);
  SpatialIndex index(c);
  const auto [idx, dist] = index.nearest(Vec3(5, 5, 5));
  CHECK(idx == 0);
  CHECK(dist == doctest::Approx(std::sqrt(75.0)).epsilon(1e-12));
}

TEST_CASE("duplicate points tie-break to the lowest index") {
  PointCloud c;
  c.points.emplace_back(1, 1, 1);
  c.points.emplace_back(1, 1, 1);
  SpatialIndex index(c);
  CHECK(index.nearest(Vec3(1, 1, 1)).first == 0);
}

TEST_CASE("nearest on a two point cloud") {
  PointCloud c;
  c.points.emplace_back(0, 0, 0);
  c.points.emplace_back(2, 0, 0);
  SpatialIndex index(c);
  const auto [idx, dist] = index.nearest(Vec3(0.9, 0, 0));
  CHECK(idx == 0);
  CHECK(dist == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(index.nearest(Vec3(2, 0, 0)).second == 0.0);
}

TEST_CASE("nearest matches brute force on random clouds") {
  Rng rng(101);
  for (int rep = 0; rep < 3; ++rep) {
    const PointCloud c = random_cloud(rng, 500);
    SpatialIndex index(c);
    for (int q = 0; q < 500; ++q) {
      const Vec3 query(rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3));
      CHECK(index.nearest(query) == brute::nearest(c, query));
    }
  }
}

TEST_CASE("radius search on a unit grid finds the 6 axis neighbors") {
  PointCloud c;
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 5; ++z) c.points.emplace_back(x, y, z);
  SpatialIndex index(c);
  const auto hits = index.radius_search(Vec3(2, 2, 2), 1.0);
  CHECK(hits.size() == 7);  // the point itself plus 6 axis neighbors at distance 1
  for (std::size_t i : hits) CHECK((c.points[i] - Vec3(2, 2, 2)).norm() <= 1.0);
}

TEST_CASE("radius search rejects non-positive radii and can be empty") {
  PointCloud c;
  c.points.emplace_back(0, 0, 0);
  SpatialIndex index(c);
  CHECK_THROWS_WITH_AS(index.radius_search(Vec3(0, 0, 0), 0.0), "non-positive radius",
                       std::invalid_argument);
  CHECK(index.radius_search(Vec3(10, 0, 0), 0.5).empty());
}

TEST_CASE("radius search matches brute force and is sorted") {
  Rng rng(202);
  const PointCloud c = random_cloud(rng, 800);
  SpatialIndex index(c);
  for (int q = 0; q < 200; ++q) {
    const Vec3 center(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double radius = rng.uniform(0.05, 0.9);
    const auto got = index.radius_search(center, radius);
    CHECK(got == brute::radius_search(c, center, radius));
    CHECK(std::is_sorted(got.begin(), got.end()));
  }
}

TEST_CASE("transforms: identity, translation, rotation, round trip") {
  Rng rng(7);
  const PointCloud c = random_cloud(rng, 50);

  RigidTransform identity;
  const PointCloud same = apply_transform(c, identity);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK((same.points[i] - c.points[i]).norm() <= 1e-12);

  RigidTransform shift;
  shift.translation = Vec3(1, 2, 3);
  PointCloud origin;
  origin.points.emplace_back(0, 0, 0);
  CHECK((apply_transform(origin, shift).points[0] - Vec3(1, 2, 3)).norm() == 0.0);

  RigidTransform rot90;
  rot90.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  PointCloud ex;
  ex.points.emplace_back(1, 0, 0);
  CHECK((apply_transform(ex, rot90).points[0] - Vec3(0, 1, 0)).norm() <= 1e-12);

  RigidTransform t;
  t.rotation = rot90.rotation;
  t.translation = Vec3(0.5, -1, 2);
  t.scale = 1.7;
  const PointCloud back = apply_transform(apply_transform(c, t), t.inverse());
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK((back.points[i] - c.points[i]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("transform validation rejects bad rotations and scales") {
  RigidTransform t;
  t.scale = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.scale = 1.0;
  t.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.rotation = -Mat3::Identity();  // orthonormal but det -1
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("normals on a plane are +-z and unit length") {
  const PointCloud plane = plane_grid(20, 1.0);
  const NormalsEstimate est = estimate_normals(plane, 12);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    CHECK(std::abs(est.cloud.normals[i].norm() - 1.0) <= 1e-6);
    CHECK(std::abs(std::abs(est.cloud.normals[i].z()) - 1.0) <= 1e-9);
  }
}

TEST_CASE("normals on a dense sphere point radially within 5 degrees") {
  const PointCloud sphere = fibonacci_sphere(2000, 1.0);
  PointCloud bare;
  bare.points = sphere.points;
  const NormalsEstimate est = estimate_normals(bare, 12);
  for (std::size_t i = 0; i < bare.size(); ++i) {
    const Vec3 expected = bare.points[i].normalized();
    const double angle =
        std::acos(std::clamp(est.cloud.normals[i].dot(expected), -1.0, 1.0)) * 180.0 / M_PI;
    CHECK(angle <= 5.0);
    CHECK(est.degenerate[i] == 0);
  }
}

TEST_CASE("collinear neighborhoods are flagged degenerate") {
  PointCloud line;
  for (int i = 0; i < 4; ++i) line.points.emplace_back(i, 0, 0);
  const NormalsEstimate est = estimate_normals(line, 3);
  for (std::size_t i = 0; i < line.size(); ++i) {
    CHECK(est.degenerate[i] == 1);
    CHECK(std::abs(est.cloud.normals[i].norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("normal estimation preconditions") {
  PointCloud tiny;
  tiny.points.emplace_back(0, 0, 0);
  tiny.points.emplace_back(1, 0, 0);
  CHECK_THROWS_AS(estimate_normals(tiny, 3), std::invalid_argument);
  const PointCloud plane = plane_grid(4, 1.0);
  CHECK_THROWS_AS(estimate_normals(plane, 2), std::invalid_argument);
}
