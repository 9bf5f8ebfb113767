#include "gfp/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace gfp {

namespace {
constexpr std::uint32_t kLeafSize = 16;

struct HeapEntry {
  double d2;
  std::size_t idx;
};

// Worst element first: larger distance, then higher index.
bool heap_less(const HeapEntry& a, const HeapEntry& b) {
  if (a.d2 != b.d2) return a.d2 < b.d2;
  return a.idx < b.idx;
}
}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) : pts_(cloud.points) {
  if (pts_.empty()) throw std::invalid_argument("empty cloud");
  require_finite(cloud);
  order_.resize(pts_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
  root_ = build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    // Sort leaf by index so scans visit candidates in ascending index order.
    std::sort(order_.begin() + begin, order_.begin() + end);
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  Vec3 lo = pts_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(pts_[order_[i]]);
    hi = hi.cwiseMax(pts_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                     return a < b;
                   });

  node.axis = axis;
  node.split = pts_[order_[mid]][axis];
  const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::pair<std::size_t, double> SpatialIndex::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;

  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (pts_[idx] - query).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
          best_d2 = d2;
          best_idx = idx;
        }
      }
      return;
    }
    const double diff = query[n.axis] - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    self(self, near);
    if (diff * diff <= best_d2) self(self, far);  // equality kept for index ties
  };
  visit(visit, root_);
  return {best_idx, std::sqrt(best_d2)};
}

std::vector<std::size_t> SpatialIndex::radius_search(const Vec3& center, double radius) const {
  if (!(radius > 0.0)) throw std::invalid_argument("non-positive radius");
  const double r2 = radius * radius;
  std::vector<std::size_t> out;

  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if ((pts_[idx] - center).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    const double diff = center[n.axis] - n.split;
    if (diff < 0.0) {
      self(self, n.left);
      if (diff * diff <= r2) self(self, n.right);
    } else {
      self(self, n.right);
      if (diff * diff <= r2) self(self, n.left);
    }
  };
  visit(visit, root_);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SpatialIndex::k_nearest(const Vec3& query, std::size_t k,
                                                 std::size_t exclude_index) const {
  const std::size_t available = pts_.size() - (exclude_index != npos ? 1 : 0);
  k = std::min(k, available);
  if (k == 0) return {};

  std::vector<HeapEntry> heap;  // max-heap on (d2, idx)
  heap.reserve(k + 1);

  auto consider = [&](std::size_t idx) {
    if (idx == exclude_index) return;
    const HeapEntry e{(pts_[idx] - query).squaredNorm(), idx};
    if (heap.size() < k) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end(), heap_less);
    } else if (heap_less(e, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), heap_less);
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end(), heap_less);
    }
  };

  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) consider(order_[i]);
      return;
    }
    const double diff = query[n.axis] - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.front().d2) self(self, far);
  };
  visit(visit, root_);

  std::sort(heap.begin(), heap.end(), heap_less);
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const HeapEntry& e : heap) out.push_back(e.idx);
  return out;
}

}  // namespace gfp
