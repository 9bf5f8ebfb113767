#pragma once

#include <vector>

#include "gfp/patch.hpp"
#include "gfp/point_cloud.hpp"

namespace gfp {

struct GfsParams {
  int steps = 10;
  double step_size = 0.5;      // fraction of the normal-projected gap per step
  double smooth_blend = 0.3;   // pull toward the k-NN centroid after each step
  int smooth_k = 8;
  double cutoff_radius = 1.0;  // template influence range; beyond it points only smooth
};

/// Analytic label generator: per step every source point moves along its own
/// normal by step_size times the normal-projected distance to its nearest
/// template point (within cutoff_radius), then a Laplacian smoothing pass
/// blends each point toward its k-NN centroid. Output order matches the
/// input. Throws "normals required" when the source has no normals.
PointCloud gfs_deform(const PointCloud& source, const PointCloud& templ, const GfsParams& p);

struct LabelParams {
  GfsParams gfs;
  double mls_radius = 0.35;  // patch-local units
  int mls_order = 2;
};

/// Label = mls_smooth(gfs_deform(S, T)). Labels index-correspond to the
/// patch sources. Patches with an empty template get their source back
/// unchanged.
std::vector<PointCloud> make_labels(const std::vector<Patch>& patches, const LabelParams& p);

}  // namespace gfp
