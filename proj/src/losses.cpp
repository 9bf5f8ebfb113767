#include "gfp/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "gfp/kdtree.hpp"

namespace gfp {

namespace {

double directional_sum(const PointCloud& from, const SpatialIndex& to_index, bool squared) {
  double acc = 0.0;
  for (const Vec3& p : from.points) {
    const double d = to_index.nearest(p).second;
    acc += squared ? d * d : d;
  }
  return acc;
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b, bool squared) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty cloud");
  const SpatialIndex ia(a), ib(b);
  return directional_sum(a, ib, squared) / static_cast<double>(a.size()) +
         directional_sum(b, ia, squared) / static_cast<double>(b.size());
}

double laplacian_residual(const PointCloud& cloud, int k) {
  if (k < 3) throw std::invalid_argument("laplacian residual requires k >= 3");
  if (cloud.size() <= static_cast<std::size_t>(k))
    throw std::invalid_argument("laplacian residual requires more than k points");
  const SpatialIndex index(cloud);
  double acc = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.k_nearest(cloud.points[i], static_cast<std::size_t>(k), i);
    Vec3 c = Vec3::Zero();
    for (std::size_t j : nbrs) c += cloud.points[j];
    c /= static_cast<double>(nbrs.size());
    acc += (cloud.points[i] - c).norm();
  }
  return acc / static_cast<double>(cloud.size());
}

double total_loss(const PointCloud& modeled, const PointCloud& templ, const LossWeights& w,
                  int laplacian_k) {
  if (w.alpha < 0.0 || w.alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
  return w.alpha * chamfer(modeled, templ) +
         (1.0 - w.alpha) * laplacian_residual(modeled, laplacian_k);
}

}  // namespace gfp
