#pragma once

#include <string>
#include <vector>

#include "gfp/network.hpp"

namespace gfp {

struct Config;
struct DatasetManifest;

/// One training triple in patch-local coordinates.
struct TrainSample {
  PointCloud source;  // N points
  PointCloud templ;   // M points (network input)
  PointCloud label;   // N points, index-corresponds to source
};

struct TrainResult {
  NetworkParams params;             // best validation loss (final params if no val split)
  std::vector<double> train_curve;  // per-epoch mean training loss
  std::vector<double> val_curve;    // empty when val fraction is 0
  int best_epoch = 0;
};

/// Minimizes mean over the batch of
///   alpha * CD(MS, label) + (1 - alpha) * laplacian_residual(MS)
/// with Adam. Deterministic for a fixed seed: batches are split into
/// fixed-size micro-batch shards whose gradients are reduced in shard order,
/// so results are bit-identical for any thread count.
TrainResult train(const std::vector<TrainSample>& samples, const NetworkConfig& net_cfg,
                  const Config& cfg);

/// Loads (source, template, label) triples from the manifest's train split.
std::vector<TrainSample> load_train_samples(const DatasetManifest& manifest);

/// Writes the per-epoch loss curve as tab-separated text.
void save_loss_curve(const TrainResult& result, const std::string& path);

}  // namespace gfp
