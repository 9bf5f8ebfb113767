#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfp/point_cloud.hpp"

namespace gfp {

struct Config;

/// Canonical averaged shape for an object class: centered, unit bounding
/// diagonal, PCA-aligned axes, with unit normals.
struct GenericPrimitive {
  std::string class_name;
  PointCloud cloud;
  int source_count = 0;            // number of shapes averaged
  std::size_t target_point_count = 0;
};

struct GpaResult {
  std::vector<PointCloud> aligned;  // in the mean's frame
  PointCloud mean;                  // union of aligned shapes, centered, unit diagonal
  bool converged = false;
  int rounds = 0;
};

/// Generalized Procrustes analysis with nearest-neighbor correspondences:
/// each round rigidly aligns every shape (rotation, translation, uniform
/// scale) to the evolving mean, then rebuilds the mean as the union of the
/// aligned shapes. Stops when the mean's average point movement drops below
/// tol.
GpaResult procrustes_align(const std::vector<PointCloud>& shapes, int max_rounds, double tol);

struct MlsResult {
  PointCloud cloud;                       // same count and order as the input
  std::vector<std::uint8_t> passthrough;  // 1 where the neighborhood was insufficient
};

/// Moving-least-squares projection: each point is re-projected onto a locally
/// fitted weighted polynomial surface (Gaussian weights, sigma = radius/2).
/// Points with fewer than 6 neighbors inside the radius pass through
/// unchanged and are flagged. poly_order must be 1 or 2.
MlsResult mls_smooth(const PointCloud& cloud, double radius, int poly_order);

struct ResampleResult {
  PointCloud cloud;
  bool unchanged = false;  // set when target_count >= input count
};

/// Voxel-grid downsampling; the voxel edge is binary-searched until the
/// output count is within 2% of target_count. Each voxel is represented by
/// the member point closest to the voxel centroid.
ResampleResult resample(const PointCloud& cloud, std::size_t target_count);

/// procrustes_align -> merge -> mls_smooth -> resample -> normals, then a
/// canonical PCA orientation. Deterministic given inputs and config.
GenericPrimitive build_gp(const std::string& class_name, const std::vector<PointCloud>& shapes,
                          const Config& cfg);

/// GP persistence: PLY next to a small key: value metadata text file.
void save_gp(const GenericPrimitive& gp, const std::string& ply_path,
             const std::string& meta_path, std::uint64_t config_hash);
GenericPrimitive load_gp(const std::string& ply_path, const std::string& meta_path);

}  // namespace gfp
