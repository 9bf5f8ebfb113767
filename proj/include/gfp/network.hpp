#pragma once

#include <string>
#include <vector>

#include "gfp/adam.hpp"
#include "gfp/autodiff.hpp"
#include "gfp/patch.hpp"
#include "gfp/point_cloud.hpp"
#include "gfp/rng.hpp"

namespace gfp {

struct NetworkConfig {
  std::vector<int> encoder_widths{64, 128, 512, 1024};
  std::vector<int> iterative_encoder_widths{64, 128, 1024};
  std::vector<int> decoder_widths{1024, 512, 256};
  int head_width = 64;      // hidden width of the per-point residual head
  int source_count = 64;    // N: points per source patch
  int template_count = 64;  // M: points per template patch
  double dropout_p = 0.2;
  bool iterative = true;    // selects the 3-layer encoder stack

  const std::vector<int>& active_encoder_widths() const {
    return iterative ? iterative_encoder_widths : encoder_widths;
  }
  int pooled_width() const { return active_encoder_widths().back(); }
  void validate() const;  // throws on empty/non-positive widths or N,M < 8
};

/// Weights and biases of both encoder branches, the decoder trunk and the
/// per-point residual head, in a fixed order used by checkpoints.
struct NetworkParams {
  NetworkConfig config;
  ad::ParamSet params;
};

/// Xavier-uniform init; the final head layer starts at zero so that the
/// network is the identity mapping (MS = S) before any training.
NetworkParams init_params(const NetworkConfig& cfg, Rng& rng, bool zero_residual_head = true);

/// Graph handles of one stacked forward pass.
struct ForwardNodes {
  ad::NodeId modeled;      // [batch*N, 3]
  ad::NodeId src_pooled;   // [batch, F]
  ad::NodeId tmpl_pooled;  // [batch, F]
};

/// Builds the twin-encoder / max-pool / concat / decoder graph over a
/// micro-batch. Sources are stacked [batch*N,3], templates [batch*M,3].
/// dropout_rng must be given when training and dropout_p > 0.
ForwardNodes build_forward(ad::Graph& g, const NetworkParams& net, const ad::Mat& src_stacked,
                           const ad::Mat& tmpl_stacked, int batch, bool training,
                           Rng* dropout_rng);

/// Same, over caller-registered parameter leaves (one per tensor, in tensor
/// order) so the caller can read per-parameter gradients after backward().
ForwardNodes build_forward_with_leaves(ad::Graph& g, const NetworkParams& net,
                                       const std::vector<ad::NodeId>& param_leaves,
                                       const ad::Mat& src_stacked, const ad::Mat& tmpl_stacked,
                                       int batch, bool training, Rng* dropout_rng);

/// Single-sample inference. |S| must equal N and |T| must equal M.
PointCloud forward(const NetworkParams& net, const PointCloud& source,
                   const PointCloud& templ);

/// Applies forward m_iters times, feeding the modeled cloud back as the
/// source while the template stays fixed. An empty template is a no-op
/// (returns the patch source unchanged).
PointCloud iterative_complete(const NetworkParams& net, const Patch& patch, int m_iters);

void save_checkpoint(const NetworkParams& net, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

ad::Mat stack_points(const PointCloud& cloud);  // [n,3]
PointCloud unstack_points(const ad::Mat& m);

}  // namespace gfp
