#include "gfp/point_cloud.hpp"

#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace gfp {

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.scale = 1.0 / scale;
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation = rotation * inner.rotation;
  out.scale = scale * inner.scale;
  out.translation = scale * (rotation * inner.translation) + translation;
  return out;
}

void RigidTransform::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("transform scale must be positive");
  const Mat3 rtr = rotation.transpose() * rotation;
  if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("transform rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("transform rotation determinant is not +1");
}

Vec3 centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : cloud.points) sum += p;
  return sum / static_cast<double>(cloud.size());
}

double bounding_diagonal(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("empty cloud");
  Vec3 lo = cloud.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

void require_finite(const PointCloud& cloud) {
  for (const Vec3& p : cloud.points)
    if (!p.allFinite()) throw std::invalid_argument("cloud contains non-finite coordinates");
  for (const Vec3& n : cloud.normals)
    if (!n.allFinite()) throw std::invalid_argument("cloud contains non-finite normals");
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  t.validate();
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
  out.normals.reserve(cloud.normals.size());
  for (const Vec3& n : cloud.normals) out.normals.push_back(t.rotation * n);
  return out;
}

PointCloud centered(const PointCloud& cloud) {
  const Vec3 c = centroid(cloud);
  PointCloud out = cloud;
  for (Vec3& p : out.points) p -= c;
  return out;
}

}  // namespace gfp
