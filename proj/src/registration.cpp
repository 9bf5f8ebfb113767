#include "gfp/registration.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gfp/gp_builder.hpp"
#include "gfp/kdtree.hpp"

namespace gfp {

RigidTransform umeyama_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw std::invalid_argument("umeyama fit needs >= 3 point pairs of equal count");
  Eigen::MatrixXd s(3, src.size()), d(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    s.col(static_cast<Eigen::Index>(i)) = src[i];
    d.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, true);
  RigidTransform out;
  const double scale = std::cbrt(t.block<3, 3>(0, 0).determinant());
  out.scale = scale;
  out.rotation = t.block<3, 3>(0, 0) / scale;
  out.translation = t.block<3, 1>(0, 3);
  return out;
}

namespace {

bool rank_deficient(const PointCloud& cloud) {
  const Vec3 c = centroid(cloud);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud.points) {
    const Vec3 d = p - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();
  return ev[1] <= 1e-12 * std::max(ev[2], 1e-300);
}

RigidTransform initial_alignment(const PointCloud& source, const PointCloud& target) {
  RigidTransform t;
  const double ds = bounding_diagonal(source);
  const double dt = bounding_diagonal(target);
  t.scale = ds > 0.0 ? dt / ds : 1.0;
  t.translation = centroid(target) - t.scale * centroid(source);
  return t;
}

}  // namespace

IcpResult icp_register(const PointCloud& source, const PointCloud& target,
                       const IcpParams& params) {
  if (source.size() < 10 || target.size() < 10)
    throw std::invalid_argument("icp needs clouds of >= 10 points");
  if (rank_deficient(target)) throw std::invalid_argument("degenerate geometry");

  // Correspondences run from the target (the partial observation) into the
  // source: every target point lies on the full source surface, so the match
  // set stays clean under partial overlap, and the RMSE is measured over the
  // overlapping region.
  const SpatialIndex source_index(source);

  IcpResult result;
  result.transform = initial_alignment(source, target);

  struct Corr {
    double d2;  // in the target frame
    std::uint32_t src;
    std::uint32_t dst;
  };
  std::vector<Corr> corr(target.size());

  double prev_rmse = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < params.max_iters; ++iter) {
    const RigidTransform inv = result.transform.inverse();
    for (std::size_t j = 0; j < target.size(); ++j) {
      const auto [i, dist] = source_index.nearest(inv.apply(target.points[j]));
      const double d = dist * result.transform.scale;
      corr[j] = {d * d, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
    }

    // Trimming kicks in once the alignment is roughly settled; dropping the
    // worst matches guards against noise and clutter.
    std::size_t kept = corr.size();
    if (iter >= 2 && params.trim_fraction > 0.0) {
      kept = std::max<std::size_t>(
          10, corr.size() - static_cast<std::size_t>(params.trim_fraction *
                                                     static_cast<double>(corr.size())));
      std::sort(corr.begin(), corr.end(), [](const Corr& a, const Corr& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        return a.dst < b.dst;
      });
    }

    double sum_d2 = 0.0;
    for (std::size_t i = 0; i < kept; ++i) sum_d2 += corr[i].d2;
    const double rmse = std::sqrt(sum_d2 / static_cast<double>(kept));
    result.rmse_history.push_back(rmse);
    result.rmse = rmse;
    result.iterations = iter + 1;

    if (prev_rmse - rmse < params.tol) break;
    prev_rmse = rmse;

    std::vector<Vec3> s, d;
    s.reserve(kept);
    d.reserve(kept);
    for (std::size_t i = 0; i < kept; ++i) {
      s.push_back(source.points[corr[i].src]);
      d.push_back(target.points[corr[i].dst]);
    }
    result.transform = umeyama_fit(s, d);
  }
  return result;
}

PointCloud register_gp(const GenericPrimitive& gp, const PointCloud& observation,
                       const RegisterParams& params) {
  if (observation.size() < 10)
    throw std::invalid_argument("observation needs >= 10 points for registration");
  IcpParams icp;
  icp.max_iters = params.outer_iters * params.inner_steps;
  icp.tol = params.tol;
  icp.trim_fraction = params.trim_fraction;
  const IcpResult r = icp_register(gp.cloud, observation, icp);
  return apply_transform(gp.cloud, r.transform);
}

}  // namespace gfp
