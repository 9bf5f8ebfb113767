#pragma once

#include <cstdint>
#include <vector>

#include "gfp/point_cloud.hpp"

namespace gfp {

struct NormalsEstimate {
  PointCloud cloud;                      // input points plus unit normals
  std::vector<std::uint8_t> degenerate;  // per point: 1 when the k-NN covariance had rank < 2
};

/// Per-point normal = smallest-eigenvalue eigenvector of the k-NN covariance,
/// oriented away from the cloud centroid. Degenerate neighborhoods fall back
/// to the centroid-outward direction and are flagged.
NormalsEstimate estimate_normals(const PointCloud& cloud, int k);

}  // namespace gfp
