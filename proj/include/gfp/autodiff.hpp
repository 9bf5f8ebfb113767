#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gfp/point_cloud.hpp"
#include "gfp/rng.hpp"

namespace gfp::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeId = std::int32_t;

/// Single-episode reverse-mode tape over dense row-major matrices.
///
/// Nodes are created in topological order; backward() walks the tape in
/// reverse. A Graph is confined to one thread; independent graphs (one per
/// batch shard) may run concurrently against shared read-only parameters.
class Graph {
 public:
  /// Differentiable view of externally owned parameter storage. The matrix
  /// must outlive the graph; its gradient lives in the graph.
  NodeId leaf(const Mat& params);

  /// Non-differentiable input.
  NodeId constant(Mat value);
  NodeId constant_points(const PointCloud& cloud);  // [n,3]

  NodeId matmul(NodeId a, NodeId b);

  /// relu(x w + b) fused into a single buffer; b is a [1,d] row vector. The
  /// relu mask is recovered from the output sign in the backward pass.
  NodeId linear_relu(NodeId x, NodeId w, NodeId b);

  NodeId add(NodeId a, NodeId b);  // b may be a [1,d] row vector (broadcast)
  NodeId sub(NodeId a, NodeId b);  // same broadcast rule
  NodeId mul(NodeId a, NodeId b);  // elementwise, same broadcast rule
  NodeId relu(NodeId a);
  NodeId scale(NodeId a, double factor);

  /// Column-wise max over all rows: [n,d] -> [1,d]. Gradient is routed to the
  /// argmax row (lowest row index on ties).
  NodeId max_over_points(NodeId a);

  /// Column-wise max per consecutive row segment: [s*len,d] -> [s,d].
  NodeId segmented_max(NodeId a, int segment_len);

  NodeId concat_cols(NodeId a, NodeId b);

  /// Repeats each row `times` times consecutively: [s,d] -> [s*times,d].
  NodeId repeat_rows(NodeId a, int times);

  /// Identity when !training or p == 0; otherwise keeps units with
  /// probability 1-p scaled by 1/(1-p). Requires 0 <= p < 1.
  NodeId dropout(NodeId a, double p, bool training, Rng& rng);

  NodeId mean_all(NodeId a);  // [n,d] -> [1,1]

  /// Per-segment symmetric chamfer distance to fixed targets: [s*len,3] ->
  /// [s,1]. targets[i] is an [m,3] matrix, m >= 1. Unsquared distances by
  /// default, matching the loss definition.
  NodeId chamfer_batch(NodeId x, int segment_len, const std::vector<Mat>& targets,
                       bool squared = false);

  /// Per-segment mean distance to the centroid of each point's k nearest
  /// neighbors (within the segment, excluding the point): [s*len,3] -> [s,1].
  NodeId laplacian_batch(NodeId x, int segment_len, int k);

  void backward(NodeId scalar);  // scalar must be [1,1]

  const Mat& value(NodeId id) const { return nodes_[id].external ? *nodes_[id].external : nodes_[id].value; }
  const Mat& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  /// Drops all nodes but keeps buffer capacity for reuse.
  void clear();

  /// When enabled, every op verifies its result is finite (slower; intended
  /// for tests and small runs).
  void set_check_finite(bool on) { check_finite_ = on; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::function<void(Graph&)> backward;
  };

  NodeId push(Mat value, bool requires_grad, std::function<void(Graph&)> backward,
              const char* op_name);
  Mat& grad_buf(NodeId id);
  NodeId next_id() const;

  // The first contribution to a gradient assigns instead of accumulating,
  // skipping a zero-fill and a read pass over multi-megabyte buffers.
  template <typename Expr>
  void accum_grad(NodeId id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad_ready) {
      n.grad = e;
      n.grad_ready = true;
    } else {
      n.grad += e;
    }
  }

  template <typename Expr>
  void accum_grad_product(NodeId id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad_ready) {
      const Mat& v = n.external ? *n.external : n.value;
      n.grad.resize(v.rows(), v.cols());
      n.grad.noalias() = e;
      n.grad_ready = true;
    } else {
      n.grad.noalias() += e;
    }
  }

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

std::string shape_str(const Mat& m);

}  // namespace gfp::ad
