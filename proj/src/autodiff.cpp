#include "gfp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace gfp::ad {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Mat& a, const Mat& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch: " + shape_str(a) + " vs " +
                              shape_str(b));
}

bool row_broadcast(const Mat& a, const Mat& b) {
  return b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols();
}

}  // namespace

std::string shape_str(const Mat& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

NodeId Graph::push(Mat value, bool requires_grad, std::function<void(Graph&)> backward,
                   const char* op_name) {
  if (check_finite_ && !value.allFinite())
    throw std::runtime_error(std::string("non-finite values produced by ") + op_name);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(const Mat& params) {
  Node n;
  n.external = &params;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Mat value) { return push(std::move(value), false, nullptr, "constant"); }

NodeId Graph::constant_points(const PointCloud& cloud) {
  Mat m(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = cloud.points[i].transpose();
  return constant(std::move(m));
}

Mat& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad.setZero(value(id).rows(), value(id).cols());
    n.grad_ready = true;
  }
  return n.grad;
}

const Mat& Graph::grad(NodeId id) const {
  if (!nodes_[id].grad_ready) throw std::runtime_error("no gradients");
  return nodes_[id].grad;
}

NodeId Graph::next_id() const { return static_cast<NodeId>(nodes_.size()); }

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.cols() != vb.rows()) shape_mismatch("matmul", va, vb);
  Mat out(va.rows(), vb.cols());
  out.noalias() = va * vb;
  const bool rg = requires_grad(a) || requires_grad(b);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, b](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                g.accum_grad_product(a, dc * g.value(b).transpose());
                g.accum_grad_product(b, g.value(a).transpose() * dc);
              })
                 : nullptr,
              "matmul");
}

NodeId Graph::linear_relu(NodeId x, NodeId w, NodeId b) {
  const Mat& vx = value(x);
  const Mat& vw = value(w);
  const Mat& vb = value(b);
  if (vx.cols() != vw.rows()) shape_mismatch("linear_relu", vx, vw);
  if (vb.rows() != 1 || vb.cols() != vw.cols()) shape_mismatch("linear_relu", vw, vb);
  Mat out(vx.rows(), vw.cols());
  out.noalias() = vx * vw;
  out = (out.rowwise() + vb.row(0)).cwiseMax(0.0);
  const bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, x, w, b](Graph& g) {
                const Node& n = g.nodes_[self];
                // output > 0 iff the pre-activation was > 0
                const Mat masked =
                    (n.grad.array() * (n.value.array() > 0.0).cast<double>()).matrix();
                g.accum_grad_product(x, masked * g.value(w).transpose());
                g.accum_grad_product(w, g.value(x).transpose() * masked);
                g.accum_grad(b, masked.colwise().sum());
              })
                 : nullptr,
              "linear_relu");
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  const bool bc = row_broadcast(va, vb);
  if (!bc && (va.rows() != vb.rows() || va.cols() != vb.cols())) shape_mismatch("add", va, vb);
  Mat out = bc ? Mat(va.rowwise() + vb.row(0)) : Mat(va + vb);
  const bool rg = requires_grad(a) || requires_grad(b);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, b, bc](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                g.accum_grad(a, dc);
                if (bc)
                  g.accum_grad(b, dc.colwise().sum());
                else
                  g.accum_grad(b, dc);
              })
                 : nullptr,
              "add");
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  const bool bc = row_broadcast(va, vb);
  if (!bc && (va.rows() != vb.rows() || va.cols() != vb.cols())) shape_mismatch("sub", va, vb);
  Mat out = bc ? Mat(va.rowwise() - vb.row(0)) : Mat(va - vb);
  const bool rg = requires_grad(a) || requires_grad(b);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, b, bc](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                g.accum_grad(a, dc);
                if (bc)
                  g.accum_grad(b, (-dc.colwise().sum()).eval());
                else
                  g.accum_grad(b, -dc);
              })
                 : nullptr,
              "sub");
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  const bool bc = row_broadcast(va, vb);
  if (!bc && (va.rows() != vb.rows() || va.cols() != vb.cols())) shape_mismatch("mul", va, vb);
  Mat out = bc ? Mat(va.array().rowwise() * vb.row(0).array()) : Mat(va.cwiseProduct(vb));
  const bool rg = requires_grad(a) || requires_grad(b);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, b, bc](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                if (bc) {
                  g.accum_grad(a, (dc.array().rowwise() * g.value(b).row(0).array()).matrix());
                  g.accum_grad(b, dc.cwiseProduct(g.value(a)).colwise().sum());
                } else {
                  g.accum_grad(a, dc.cwiseProduct(g.value(b)));
                  g.accum_grad(b, dc.cwiseProduct(g.value(a)));
                }
              })
                 : nullptr,
              "mul");
}

NodeId Graph::relu(NodeId a) {
  Mat out = value(a).cwiseMax(0.0);
  const bool rg = requires_grad(a);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                // Subgradient 0 at exactly 0.
                g.accum_grad(
                    a, (dc.array() * (g.value(a).array() > 0.0).cast<double>()).matrix());
              })
                 : nullptr,
              "relu");
}

NodeId Graph::scale(NodeId a, double factor) {
  Mat out = value(a) * factor;
  const bool rg = requires_grad(a);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, factor](Graph& g) {
                g.accum_grad(a, g.nodes_[self].grad * factor);
              })
                 : nullptr,
              "scale");
}

NodeId Graph::max_over_points(NodeId a) {
  return segmented_max(a, static_cast<int>(value(a).rows()));
}

NodeId Graph::segmented_max(NodeId a, int segment_len) {
  const Mat& va = value(a);
  if (segment_len <= 0 || va.rows() % segment_len != 0)
    throw std::invalid_argument("segmented_max: rows " + std::to_string(va.rows()) +
                                " not divisible by segment length " + std::to_string(segment_len));
  const Eigen::Index segs = va.rows() / segment_len;
  const Eigen::Index cols = va.cols();
  Mat out(segs, cols);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(segs * cols));
  // Row-wise sweep: sequential access over the row-major storage.
  for (Eigen::Index s = 0; s < segs; ++s) {
    const Eigen::Index base = s * segment_len;
    out.row(s) = va.row(base);
    std::int32_t* as = arg.data() + static_cast<std::size_t>(s * cols);
    for (Eigen::Index c = 0; c < cols; ++c) as[c] = static_cast<std::int32_t>(base);
    double* os = out.data() + static_cast<std::size_t>(s * cols);
    for (Eigen::Index r = base + 1; r < base + segment_len; ++r) {
      const double* row = va.data() + static_cast<std::size_t>(r * cols);
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (row[c] > os[c]) {  // strict: ties keep the lowest row
          os[c] = row[c];
          as[c] = static_cast<std::int32_t>(r);
        }
      }
    }
  }
  const bool rg = requires_grad(a);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>(
                       [self, a, arg = std::move(arg), segs, cols](Graph& g) {
                         const Mat& dc = g.nodes_[self].grad;
                         Mat& da = g.grad_buf(a);
                         for (Eigen::Index s = 0; s < segs; ++s)
                           for (Eigen::Index c = 0; c < cols; ++c)
                             da(arg[static_cast<std::size_t>(s * cols + c)], c) += dc(s, c);
                       })
                 : nullptr,
              "segmented_max");
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.rows() != vb.rows()) shape_mismatch("concat_cols", va, vb);
  Mat out(va.rows(), va.cols() + vb.cols());
  out.leftCols(va.cols()) = va;
  out.rightCols(vb.cols()) = vb;
  const bool rg = requires_grad(a) || requires_grad(b);
  const Eigen::Index ca = va.cols();
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, b, ca](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                g.accum_grad(a, dc.leftCols(ca));
                g.accum_grad(b, dc.rightCols(dc.cols() - ca));
              })
                 : nullptr,
              "concat_cols");
}

NodeId Graph::repeat_rows(NodeId a, int times) {
  if (times <= 0) throw std::invalid_argument("repeat_rows: times must be positive");
  const Mat& va = value(a);
  Mat out(va.rows() * times, va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r)
    out.middleRows(r * times, times).rowwise() = va.row(r);
  const bool rg = requires_grad(a);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, times](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                Mat& da = g.grad_buf(a);
                for (Eigen::Index r = 0; r < da.rows(); ++r)
                  da.row(r) += dc.middleRows(r * times, times).colwise().sum();
              })
                 : nullptr,
              "repeat_rows");
}

NodeId Graph::dropout(NodeId a, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0,1)");
  if (!training || p == 0.0) return a;
  const Mat& va = value(a);
  Mat mask(va.rows(), va.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < va.rows(); ++r)
    for (Eigen::Index c = 0; c < va.cols(); ++c)
      mask(r, c) = rng.next_double() < p ? 0.0 : keep_scale;
  Mat out = va.cwiseProduct(mask);
  const bool rg = requires_grad(a);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, mask = std::move(mask)](Graph& g) {
                g.accum_grad(a, g.nodes_[self].grad.cwiseProduct(mask));
              })
                 : nullptr,
              "dropout");
}

NodeId Graph::mean_all(NodeId a) {
  const Mat& va = value(a);
  Mat out(1, 1);
  out(0, 0) = va.mean();
  const bool rg = requires_grad(a);
  const double inv = 1.0 / static_cast<double>(va.size());
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, a, inv](Graph& g) {
                g.grad_buf(a).array() += g.nodes_[self].grad(0, 0) * inv;
              })
                 : nullptr,
              "mean_all");
}

NodeId Graph::chamfer_batch(NodeId x, int segment_len, const std::vector<Mat>& targets,
                            bool squared) {
  const Mat& vx = value(x);
  if (vx.cols() != 3) throw std::invalid_argument("chamfer_batch: input must be [n,3]");
  if (segment_len <= 0 || vx.rows() % segment_len != 0 ||
      vx.rows() / segment_len != static_cast<Eigen::Index>(targets.size()))
    throw std::invalid_argument("chamfer_batch: segment/target count mismatch");
  const Eigen::Index segs = static_cast<Eigen::Index>(targets.size());

  std::vector<std::vector<std::int32_t>> fwd_arg(targets.size()), rev_arg(targets.size());
  Mat out(segs, 1);

  for (Eigen::Index s = 0; s < segs; ++s) {
    const Mat& t = targets[static_cast<std::size_t>(s)];
    if (t.rows() == 0) throw std::invalid_argument("empty cloud");
    const Eigen::Index base = s * segment_len;
    auto& fa = fwd_arg[static_cast<std::size_t>(s)];
    auto& ra = rev_arg[static_cast<std::size_t>(s)];
    fa.resize(static_cast<std::size_t>(segment_len));
    ra.resize(static_cast<std::size_t>(t.rows()));

    double term1 = 0.0;
    for (Eigen::Index i = 0; i < segment_len; ++i) {
      double best = (vx.row(base + i) - t.row(0)).squaredNorm();
      Eigen::Index best_j = 0;
      for (Eigen::Index j = 1; j < t.rows(); ++j) {
        const double d2 = (vx.row(base + i) - t.row(j)).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_j = j;
        }
      }
      fa[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best_j);
      term1 += squared ? best : std::sqrt(best);
    }
    double term2 = 0.0;
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
      double best = (vx.row(base) - t.row(j)).squaredNorm();
      Eigen::Index best_i = 0;
      for (Eigen::Index i = 1; i < segment_len; ++i) {
        const double d2 = (vx.row(base + i) - t.row(j)).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_i = i;
        }
      }
      ra[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(best_i);
      term2 += squared ? best : std::sqrt(best);
    }
    out(s, 0) = term1 / static_cast<double>(segment_len) + term2 / static_cast<double>(t.rows());
  }

  const bool rg = requires_grad(x);
  const NodeId self = next_id();
  return push(
      std::move(out), rg,
      rg ? std::function<void(Graph&)>([self, x, segment_len, targets, squared,
                                        fwd_arg = std::move(fwd_arg),
                                        rev_arg = std::move(rev_arg)](Graph& g) {
        const Mat& dc = g.nodes_[self].grad;
        const Mat& vx = g.value(x);
        Mat& dx = g.grad_buf(x);
        for (std::size_t s = 0; s < targets.size(); ++s) {
          const double gs = dc(static_cast<Eigen::Index>(s), 0);
          if (gs == 0.0) continue;
          const Mat& t = targets[s];
          const Eigen::Index base = static_cast<Eigen::Index>(s) * segment_len;
          const double w1 = gs / static_cast<double>(segment_len);
          for (Eigen::Index i = 0; i < segment_len; ++i) {
            const Eigen::Index j = fwd_arg[s][static_cast<std::size_t>(i)];
            const Eigen::RowVector3d diff = vx.row(base + i) - t.row(j);
            if (squared) {
              dx.row(base + i) += 2.0 * w1 * diff;
            } else {
              const double d = diff.norm();
              if (d > 0.0) dx.row(base + i) += (w1 / d) * diff;
            }
          }
          const double w2 = gs / static_cast<double>(t.rows());
          for (Eigen::Index j = 0; j < t.rows(); ++j) {
            const Eigen::Index i = rev_arg[s][static_cast<std::size_t>(j)];
            const Eigen::RowVector3d diff = vx.row(base + i) - t.row(j);
            if (squared) {
              dx.row(base + i) += 2.0 * w2 * diff;
            } else {
              const double d = diff.norm();
              if (d > 0.0) dx.row(base + i) += (w2 / d) * diff;
            }
          }
        }
      })
         : nullptr,
      "chamfer_batch");
}

NodeId Graph::laplacian_batch(NodeId x, int segment_len, int k) {
  const Mat& vx = value(x);
  if (vx.cols() != 3) throw std::invalid_argument("laplacian_batch: input must be [n,3]");
  if (segment_len <= 0 || vx.rows() % segment_len != 0)
    throw std::invalid_argument("laplacian_batch: bad segment length");
  if (k < 3) throw std::invalid_argument("laplacian_batch: k must be >= 3");
  if (segment_len <= k)
    throw std::invalid_argument("laplacian_batch: segment length must exceed k");
  const Eigen::Index segs = vx.rows() / segment_len;

  std::vector<std::int32_t> nbrs(static_cast<std::size_t>(vx.rows()) *
                                 static_cast<std::size_t>(k));
  Mat out(segs, 1);

  for (Eigen::Index s = 0; s < segs; ++s) {
    const Eigen::Index base = s * segment_len;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < segment_len; ++i) {
      std::vector<std::pair<double, Eigen::Index>> best;  // max-heap of (d2, idx)
      best.reserve(static_cast<std::size_t>(k) + 1);
      for (Eigen::Index j = 0; j < segment_len; ++j) {
        if (j == i) continue;
        const double d2 = (vx.row(base + i) - vx.row(base + j)).squaredNorm();
        const std::pair<double, Eigen::Index> cand{d2, j};
        if (best.size() < static_cast<std::size_t>(k)) {
          best.push_back(cand);
          std::push_heap(best.begin(), best.end());
        } else if (cand < best.front()) {
          std::pop_heap(best.begin(), best.end());
          best.back() = cand;
          std::push_heap(best.begin(), best.end());
        }
      }
      Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
      for (std::size_t q = 0; q < best.size(); ++q) {
        c += vx.row(base + best[q].second);
        nbrs[(static_cast<std::size_t>(base + i)) * k + q] =
            static_cast<std::int32_t>(best[q].second);
      }
      c /= static_cast<double>(k);
      acc += (vx.row(base + i) - c).norm();
    }
    out(s, 0) = acc / static_cast<double>(segment_len);
  }

  const bool rg = requires_grad(x);
  const NodeId self = next_id();
  return push(std::move(out), rg,
              rg ? std::function<void(Graph&)>([self, x, segment_len, k, nbrs = std::move(nbrs),
                                                segs](Graph& g) {
                const Mat& dc = g.nodes_[self].grad;
                const Mat& vx = g.value(x);
                Mat& dx = g.grad_buf(x);
                const double inv_k = 1.0 / static_cast<double>(k);
                for (Eigen::Index s = 0; s < segs; ++s) {
                  const double gs = dc(s, 0) / static_cast<double>(segment_len);
                  if (gs == 0.0) continue;
                  const Eigen::Index base = s * segment_len;
                  for (Eigen::Index i = 0; i < segment_len; ++i) {
                    Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
                    for (int q = 0; q < k; ++q)
                      c += vx.row(base + nbrs[(static_cast<std::size_t>(base + i)) * k + q]);
                    c *= inv_k;
                    Eigen::RowVector3d r = vx.row(base + i) - c;
                    const double d = r.norm();
                    if (d == 0.0) continue;
                    r /= d;
                    dx.row(base + i) += gs * r;
                    for (int q = 0; q < k; ++q)
                      dx.row(base + nbrs[(static_cast<std::size_t>(base + i)) * k + q]) -=
                          gs * inv_k * r;
                  }
                }
              })
                 : nullptr,
              "laplacian_batch");
}

void Graph::backward(NodeId scalar) {
  const Mat& v = value(scalar);
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("backward requires a scalar node, got " + shape_str(v));
  grad_buf(scalar)(0, 0) = 1.0;
  for (NodeId id = scalar; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || !n.grad_ready) continue;
    n.backward(*this);
  }
}

void Graph::clear() { nodes_.clear(); }

}  // namespace gfp::ad
