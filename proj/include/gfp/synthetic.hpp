#pragma once

#include <cstdint>
#include <vector>

#include "gfp/gp_builder.hpp"
#include "gfp/metrics.hpp"
#include "gfp/point_cloud.hpp"
#include "gfp/train.hpp"

namespace gfp {

struct Config;

/// Evenly distributed sphere samples (Fibonacci lattice), centered at origin.
PointCloud fibonacci_sphere(std::size_t n, double radius = 1.0);

/// Fibonacci sphere stretched by per-axis factors.
PointCloud ellipsoid(std::size_t n, const Vec3& semi_axes);

/// Axis-aligned grid on the plane z = 0, spanning [-extent, extent]^2.
PointCloud plane_grid(int per_side, double extent);

/// All six faces of an axis-aligned cube of the given half-extent, sampled on
/// a shared per-face grid so edges coincide.
PointCloud cube_faces(int per_side, double half_extent);

/// Sphere-to-ellipsoid toy patch family: sources sampled around random GP
/// points of a unit-diagonal sphere (some pre-blended part way toward the
/// target, as visited by iterative refinement), templates from a random
/// ellipsoid, labels from the GFS oracle plus MLS refinement. Patches whose
/// label does not improve on the source (CD to template) are rejected and
/// regenerated, mirroring the label quality gate.
std::vector<TrainSample> make_toy_patches(std::size_t count, std::uint64_t seed,
                                          const Config& cfg);

struct ToyBenchmark {
  GenericPrimitive gp;  // unit-diagonal sphere
  std::vector<BenchmarkSample> samples;
};

/// `n_instances` random ellipsoids, `views_per_instance` partial views each.
ToyBenchmark make_toy_benchmark(std::size_t n_instances, int views_per_instance,
                                std::uint64_t seed, const Config& cfg);

}  // namespace gfp
