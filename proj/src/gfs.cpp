#include "gfp/gfs.hpp"

#include <optional>
#include <stdexcept>

#include "gfp/gp_builder.hpp"
#include "gfp/kdtree.hpp"

namespace gfp {

PointCloud gfs_deform(const PointCloud& source, const PointCloud& templ, const GfsParams& p) {
  if (!source.has_normals()) throw std::invalid_argument("normals required");
  if (source.empty()) throw std::invalid_argument("empty cloud");
  if (!(p.step_size > 0.0 && p.step_size <= 1.0))
    throw std::invalid_argument("gfs step size must be in (0,1]");

  PointCloud current;
  current.points = source.points;

  std::optional<SpatialIndex> templ_index;
  if (!templ.empty()) templ_index.emplace(templ);

  // Fixed neighborhood graph over the undeformed source. Smoothing acts on
  // the displacement field: blending positions toward point centroids would
  // contract bounded patches and bend smooth surfaces inward, so an
  // undeformed cloud would not be a fixed point.
  std::vector<std::vector<std::size_t>> neighbors;
  const bool smoothing =
      p.smooth_blend > 0.0 && current.size() > static_cast<std::size_t>(p.smooth_k);
  if (smoothing) {
    const SpatialIndex src_index(source);
    neighbors.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i)
      neighbors[i] =
          src_index.k_nearest(source.points[i], static_cast<std::size_t>(p.smooth_k), i);
  }

  std::vector<Vec3> displacement(source.size(), Vec3::Zero());

  for (int step = 0; step < p.steps; ++step) {
    if (templ_index) {
      for (std::size_t i = 0; i < current.size(); ++i) {
        const auto [j, dist] = templ_index->nearest(current.points[i]);
        if (dist > p.cutoff_radius) continue;  // no template support: smoothing only
        const Vec3& n = source.normals[i];
        const double gap = n.dot(templ.points[j] - current.points[i]);
        displacement[i] += p.step_size * gap * n;
      }
    }

    if (smoothing) {
      std::vector<Vec3> blended(displacement.size());
      for (std::size_t i = 0; i < displacement.size(); ++i) {
        Vec3 c = Vec3::Zero();
        for (std::size_t q : neighbors[i]) c += displacement[q];
        c /= static_cast<double>(neighbors[i].size());
        blended[i] = (1.0 - p.smooth_blend) * displacement[i] + p.smooth_blend * c;
      }
      displacement = std::move(blended);
    }

    for (std::size_t i = 0; i < current.size(); ++i)
      current.points[i] = source.points[i] + displacement[i];
  }
  current.normals = source.normals;
  return current;
}

std::vector<PointCloud> make_labels(const std::vector<Patch>& patches, const LabelParams& p) {
  std::vector<PointCloud> labels;
  labels.reserve(patches.size());
  for (const Patch& patch : patches) {
    if (patch.templ.empty()) {
      PointCloud copy;
      copy.points = patch.source.points;
      labels.push_back(std::move(copy));
      continue;
    }
    const PointCloud deformed = gfs_deform(patch.source, patch.templ, p.gfs);
    MlsResult smoothed = mls_smooth(deformed, p.mls_radius, p.mls_order);
    labels.push_back(std::move(smoothed.cloud));
  }
  return labels;
}

}  // namespace gfp
