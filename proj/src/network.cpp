#include "gfp/network.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gfp {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'P', 'C', 'K', 'P', 'T', '1'};

ad::Mat xavier(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

// Hidden biases start at a small positive value: with zero biases, rows whose
// previous layer is fully clamped produce pre-activations of exactly 0,
// parking units on the relu kink where subgradients are ill-conditioned.
void push_linear(ad::ParamSet& ps, const std::string& name, int in, int out, Rng& rng,
                 bool zero, double bias_init = 0.01) {
  ad::ParamTensor w;
  w.name = name + ".w";
  w.value = zero ? ad::Mat(ad::Mat::Zero(in, out)) : xavier(in, out, rng);
  ad::ParamTensor b;
  b.name = name + ".b";
  b.value = zero ? ad::Mat(ad::Mat::Zero(1, out))
                 : ad::Mat(ad::Mat::Constant(1, out, bias_init));
  ps.tensors.push_back(std::move(w));
  ps.tensors.push_back(std::move(b));
}

// Applies layer i of a stack: relu(x W + b). Params are stored as
// consecutive (w, b) leaf pairs starting at `base`.
ad::NodeId linear_relu(ad::Graph& g, const std::vector<ad::NodeId>& leaves, std::size_t base,
                       ad::NodeId x) {
  return g.linear_relu(x, leaves[base], leaves[base + 1]);
}

ad::NodeId linear(ad::Graph& g, const std::vector<ad::NodeId>& leaves, std::size_t base,
                  ad::NodeId x) {
  return g.add(g.matmul(x, leaves[base]), leaves[base + 1]);
}

}  // namespace

void NetworkConfig::validate() const {
  auto check_widths = [](const std::vector<int>& ws, const char* what) {
    if (ws.empty()) throw std::invalid_argument(std::string(what) + " widths must be non-empty");
    for (int w : ws)
      if (w <= 0) throw std::invalid_argument(std::string(what) + " widths must be positive");
  };
  check_widths(encoder_widths, "encoder");
  check_widths(iterative_encoder_widths, "iterative encoder");
  check_widths(decoder_widths, "decoder");
  if (head_width <= 0) throw std::invalid_argument("head width must be positive");
  if (source_count < 8 || template_count < 8)
    throw std::invalid_argument("patch sizes N and M must be at least 8");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw std::invalid_argument("dropout probability must be in [0,1)");
}

NetworkParams init_params(const NetworkConfig& cfg, Rng& rng, bool zero_residual_head) {
  cfg.validate();
  NetworkParams net;
  net.config = cfg;
  const auto& enc = cfg.active_encoder_widths();

  int in = 3;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    push_linear(net.params, "enc_s" + std::to_string(i), in, enc[i], rng, false);
    in = enc[i];
  }
  in = 3;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    push_linear(net.params, "enc_t" + std::to_string(i), in, enc[i], rng, false);
    in = enc[i];
  }
  in = 2 * cfg.pooled_width();
  for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i) {
    push_linear(net.params, "dec" + std::to_string(i), in, cfg.decoder_widths[i], rng, false);
    in = cfg.decoder_widths[i];
  }
  push_linear(net.params, "head0", 3 + cfg.decoder_widths.back(), cfg.head_width, rng, false);
  push_linear(net.params, "head1", cfg.head_width, 3, rng, zero_residual_head);
  net.params.alloc_grads();
  return net;
}

ForwardNodes build_forward_with_leaves(ad::Graph& g, const NetworkParams& net,
                                       const std::vector<ad::NodeId>& param_leaves,
                                       const ad::Mat& src_stacked, const ad::Mat& tmpl_stacked,
                                       int batch, bool training, Rng* dropout_rng) {
  const NetworkConfig& cfg = net.config;
  const int n = cfg.source_count;
  const int m = cfg.template_count;
  if (src_stacked.rows() != static_cast<Eigen::Index>(batch) * n || src_stacked.cols() != 3)
    throw std::invalid_argument("forward: source stack must be [batch*N,3], got " +
                                ad::shape_str(src_stacked));
  if (tmpl_stacked.rows() != static_cast<Eigen::Index>(batch) * m || tmpl_stacked.cols() != 3)
    throw std::invalid_argument("forward: template stack must be [batch*M,3], got " +
                                ad::shape_str(tmpl_stacked));
  if (param_leaves.size() != net.params.tensors.size())
    throw std::invalid_argument("forward: parameter leaf count mismatch");

  const auto& enc = cfg.active_encoder_widths();
  const std::size_t n_enc = enc.size();
  const std::size_t src_base = 0;
  const std::size_t tmpl_base = 2 * n_enc;
  const std::size_t dec_base = 4 * n_enc;
  const std::size_t head_base = dec_base + 2 * cfg.decoder_widths.size();

  const ad::NodeId src_in = g.constant(src_stacked);
  const ad::NodeId tmpl_in = g.constant(tmpl_stacked);

  // Shared per-point layers ("1x1 convolutions"), one stack per branch.
  ad::NodeId hs = src_in;
  for (std::size_t i = 0; i < n_enc; ++i) hs = linear_relu(g, param_leaves, src_base + 2 * i, hs);
  ad::NodeId ht = tmpl_in;
  for (std::size_t i = 0; i < n_enc; ++i) ht = linear_relu(g, param_leaves, tmpl_base + 2 * i, ht);

  // Symmetric max pooling gives one feature vector per branch and sample.
  const ad::NodeId pooled_s = g.segmented_max(hs, n);
  const ad::NodeId pooled_t = g.segmented_max(ht, m);

  ad::NodeId feat = g.concat_cols(pooled_s, pooled_t);  // [batch, 2F]
  for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i)
    feat = linear_relu(g, param_leaves, dec_base + 2 * i, feat);

  if (training && cfg.dropout_p > 0.0) {
    if (!dropout_rng) throw std::invalid_argument("forward: dropout requires an rng in training");
    feat = g.dropout(feat, cfg.dropout_p, true, *dropout_rng);
  }

  // Residual head: each source point is decoded against its sample's global
  // feature, which keeps the output equivariant to source-point order.
  const ad::NodeId feat_rows = g.repeat_rows(feat, n);          // [batch*N, D]
  const ad::NodeId head_in = g.concat_cols(src_in, feat_rows);  // [batch*N, 3+D]
  const ad::NodeId hidden = linear_relu(g, param_leaves, head_base, head_in);
  const ad::NodeId offsets = linear(g, param_leaves, head_base + 2, hidden);  // [batch*N, 3]

  ForwardNodes out;
  out.modeled = g.add(src_in, offsets);
  out.src_pooled = pooled_s;
  out.tmpl_pooled = pooled_t;
  return out;
}

ForwardNodes build_forward(ad::Graph& g, const NetworkParams& net, const ad::Mat& src_stacked,
                           const ad::Mat& tmpl_stacked, int batch, bool training,
                           Rng* dropout_rng) {
  std::vector<ad::NodeId> leaves;
  leaves.reserve(net.params.tensors.size());
  for (const ad::ParamTensor& t : net.params.tensors) leaves.push_back(g.leaf(t.value));
  return build_forward_with_leaves(g, net, leaves, src_stacked, tmpl_stacked, batch, training,
                                   dropout_rng);
}

ad::Mat stack_points(const PointCloud& cloud) {
  ad::Mat m(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = cloud.points[i].transpose();
  return m;
}

PointCloud unstack_points(const ad::Mat& m) {
  PointCloud c;
  c.points.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) c.points.emplace_back(m(i, 0), m(i, 1), m(i, 2));
  return c;
}

PointCloud forward(const NetworkParams& net, const PointCloud& source, const PointCloud& templ) {
  if (source.size() != static_cast<std::size_t>(net.config.source_count))
    throw std::invalid_argument("forward: source has " + std::to_string(source.size()) +
                                " points, config expects " +
                                std::to_string(net.config.source_count));
  if (templ.size() != static_cast<std::size_t>(net.config.template_count))
    throw std::invalid_argument("forward: template has " + std::to_string(templ.size()) +
                                " points, config expects " +
                                std::to_string(net.config.template_count));
  ad::Graph g;
  const ForwardNodes nodes =
      build_forward(g, net, stack_points(source), stack_points(templ), 1, false, nullptr);
  PointCloud out = unstack_points(g.value(nodes.modeled));
  require_finite(out);
  return out;
}

PointCloud iterative_complete(const NetworkParams& net, const Patch& patch, int m_iters) {
  if (m_iters < 1) throw std::invalid_argument("iterative_complete: m_iters must be >= 1");
  if (patch.templ.empty()) return patch.source;  // no template, no deformation
  PointCloud modeled = patch.source;
  for (int i = 0; i < m_iters; ++i) modeled = forward(net, modeled, patch.templ);
  return modeled;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

void write_widths(std::ofstream& out, const std::vector<int>& ws) {
  write_pod(out, static_cast<std::uint32_t>(ws.size()));
  for (int w : ws) write_pod(out, static_cast<std::int32_t>(w));
}

std::vector<int> read_widths(std::ifstream& in) {
  std::uint32_t n = 0;
  read_pod(in, n);
  if (n > 64) throw std::runtime_error("checkpoint corrupt: width count");
  std::vector<int> ws(n);
  for (auto& w : ws) {
    std::int32_t v = 0;
    read_pod(in, v);
    w = v;
  }
  return ws;
}

}  // namespace

void save_checkpoint(const NetworkParams& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_widths(out, net.config.encoder_widths);
  write_widths(out, net.config.iterative_encoder_widths);
  write_widths(out, net.config.decoder_widths);
  write_pod(out, static_cast<std::int32_t>(net.config.head_width));
  write_pod(out, static_cast<std::int32_t>(net.config.source_count));
  write_pod(out, static_cast<std::int32_t>(net.config.template_count));
  write_pod(out, net.config.dropout_p);
  write_pod(out, static_cast<std::uint8_t>(net.config.iterative ? 1 : 0));

  write_pod(out, static_cast<std::uint32_t>(net.params.tensors.size()));
  for (const ad::ParamTensor& t : net.params.tensors) {
    write_pod(out, static_cast<std::uint32_t>(t.value.rows()));
    write_pod(out, static_cast<std::uint32_t>(t.value.cols()));
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(sizeof(double) * t.value.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  NetworkParams net;
  net.config.encoder_widths = read_widths(in);
  net.config.iterative_encoder_widths = read_widths(in);
  net.config.decoder_widths = read_widths(in);
  std::int32_t head = 0, n = 0, m = 0;
  read_pod(in, head);
  read_pod(in, n);
  read_pod(in, m);
  net.config.head_width = head;
  net.config.source_count = n;
  net.config.template_count = m;
  read_pod(in, net.config.dropout_p);
  std::uint8_t iter = 0;
  read_pod(in, iter);
  net.config.iterative = iter != 0;
  net.config.validate();

  // Rebuild the canonical tensor order to recover names and layout.
  Rng rng(0);
  NetworkParams proto = init_params(net.config, rng, true);

  std::uint32_t count = 0;
  read_pod(in, count);
  if (count != proto.params.tensors.size())
    throw std::runtime_error("checkpoint corrupt: tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t rows = 0, cols = 0;
    read_pod(in, rows);
    read_pod(in, cols);
    ad::ParamTensor& t = proto.params.tensors[i];
    if (rows != t.value.rows() || cols != t.value.cols())
      throw std::runtime_error("checkpoint corrupt: tensor shape for " + t.name);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(sizeof(double) * t.value.size()));
    if (!in) throw std::runtime_error("checkpoint truncated");
  }
  net.params = std::move(proto.params);
  return net;
}

}  // namespace gfp
