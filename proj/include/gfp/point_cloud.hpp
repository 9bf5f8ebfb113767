#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace gfp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered list of 3D points with optional unit normals.
/// Point order is significant: modeling relies on index-wise correspondence
/// between a source cloud and its modeled version.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one unit vector per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void reserve(std::size_t n) { points.reserve(n); }
  void push_back(const Vec3& p) { points.push_back(p); }
};

/// Similarity transform: p' = scale * rotation * p + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner

  // Throws unless rotation is orthonormal with det +1 (1e-9) and scale > 0.
  void validate() const;
};

Vec3 centroid(const PointCloud& cloud);

/// Diagonal length of the axis-aligned bounding box.
double bounding_diagonal(const PointCloud& cloud);

/// Throws if any coordinate is NaN or infinite.
void require_finite(const PointCloud& cloud);

/// Points are transformed, normals only rotated. Order preserved.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

/// Subtracts the centroid from every point.
PointCloud centered(const PointCloud& cloud);

}  // namespace gfp
