#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gfp/point_cloud.hpp"

namespace gfp {

/// Immutable k-d tree over a snapshot of a cloud's points.
///
/// Query results match a brute-force linear scan exactly; distance ties are
/// broken by the lowest point index. Safe for concurrent reads.
class SpatialIndex {
 public:
  explicit SpatialIndex(const PointCloud& cloud);  // throws "empty cloud"

  /// Index and Euclidean distance of the closest point to `query`.
  std::pair<std::size_t, double> nearest(const Vec3& query) const;

  /// Indices with distance <= radius, sorted ascending. Throws on radius <= 0.
  std::vector<std::size_t> radius_search(const Vec3& center, double radius) const;

  /// The k closest points ordered by (distance, index), optionally excluding
  /// one index (pass npos to keep all). k is clamped to the available count.
  std::vector<std::size_t> k_nearest(const Vec3& query, std::size_t k,
                                     std::size_t exclude_index = npos) const;

  std::size_t size() const { return pts_.size(); }
  const Vec3& point(std::size_t i) const { return pts_[i]; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0, end = 0;  // range in order_ for leaves
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace gfp
