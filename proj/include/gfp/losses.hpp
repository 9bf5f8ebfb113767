#pragma once

#include "gfp/point_cloud.hpp"

namespace gfp {

struct LossWeights {
  double alpha = 0.7;  // weight of the chamfer term, in [0,1]
};

/// Symmetric chamfer distance with unsquared Euclidean distances:
/// mean_x min_y |x-y| + mean_y min_x |y-x|. `squared` switches both terms to
/// squared distances for comparison studies.
double chamfer(const PointCloud& a, const PointCloud& b, bool squared = false);

/// Mean distance from each point to the centroid of its k nearest neighbors
/// (excluding the point itself). Requires |cloud| > k >= 3.
double laplacian_residual(const PointCloud& cloud, int k);

/// alpha * chamfer(modeled, templ) + (1 - alpha) * laplacian_residual(modeled, k).
double total_loss(const PointCloud& modeled, const PointCloud& templ, const LossWeights& w,
                  int laplacian_k = 6);

}  // namespace gfp
