#pragma once

#include <vector>

#include "gfp/point_cloud.hpp"

namespace gfp {

struct GenericPrimitive;

/// Closed-form similarity fit (rotation, translation, uniform scale) mapping
/// src[i] onto dst[i] in the least-squares sense. Requires >= 3 pairs.
RigidTransform umeyama_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

struct IcpParams {
  int max_iters = 50;
  double tol = 1e-9;           // stop when RMSE improves by less than this
  double trim_fraction = 0.1;  // worst correspondences dropped after iteration 2
};

struct IcpResult {
  RigidTransform transform;          // source -> target
  double rmse = 0.0;                 // over kept correspondences
  int iterations = 0;
  std::vector<double> rmse_history;  // one entry per iteration, non-increasing
};

/// Iterative closest point with nearest-neighbor correspondences and a
/// closed-form similarity solve per iteration. Initialized by centroid
/// alignment and the bounding-diagonal scale ratio. Throws "degenerate
/// geometry" when the target is rank-deficient (collinear).
IcpResult icp_register(const PointCloud& source, const PointCloud& target,
                       const IcpParams& params = {});

struct RegisterParams {
  int outer_iters = 5;
  int inner_steps = 20;
  double tol = 1e-9;
  double trim_fraction = 0.1;
};

/// Fits the GP cloud onto the observation and returns it in the observation
/// frame (normals rotated along).
PointCloud register_gp(const GenericPrimitive& gp, const PointCloud& observation,
                       const RegisterParams& params = {});

}  // namespace gfp
