#include "gfp/normals.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "gfp/kdtree.hpp"

namespace gfp {

NormalsEstimate estimate_normals(const PointCloud& cloud, int k) {
  if (k < 3) throw std::invalid_argument("normal estimation requires k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    throw std::invalid_argument("cloud too small for normal estimation (need >= k+1 points)");

  const SpatialIndex index(cloud);
  const Vec3 center = centroid(cloud);

  NormalsEstimate out;
  out.cloud.points = cloud.points;
  out.cloud.normals.resize(cloud.size());
  out.degenerate.assign(cloud.size(), 0);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto nbrs = index.k_nearest(p, static_cast<std::size_t>(k), i);

    Vec3 mean = Vec3::Zero();
    for (std::size_t j : nbrs) mean += cloud.points[j];
    mean /= static_cast<double>(nbrs.size());

    Mat3 cov = Mat3::Zero();
    for (std::size_t j : nbrs) {
      const Vec3 d = cloud.points[j] - mean;
      cov += d * d.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    const bool rank_deficient = evals[1] <= 1e-12 * std::max(evals[2], 1e-300);

    Vec3 outward = p - center;
    if (outward.norm() < 1e-15) outward = Vec3(0, 0, 1);

    Vec3 n;
    if (rank_deficient) {
      n = outward.normalized();
      out.degenerate[i] = 1;
    } else {
      n = eig.eigenvectors().col(0);
      const double along = n.dot(outward);
      if (along < 0.0) {
        n = -n;
      } else if (along == 0.0) {
        // Normal is orthogonal to the outward ray (flat clouds); pick a
        // canonical sign so results are deterministic.
        int c = 0;
        n.cwiseAbs().maxCoeff(&c);
        if (n[c] < 0.0) n = -n;
      }
      n.normalize();
    }
    out.cloud.normals[i] = n;
  }
  return out;
}

}  // namespace gfp
