#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gfp/adam.hpp"
#include "gfp/losses.hpp"
#include "gfp/network.hpp"

namespace gfp {

/// Every tunable of the pipeline, with documented defaults. Values can be
/// overridden from a key=value config file and again from CLI flags.
struct Config {
  std::uint64_t seed = 0;
  int threads = 1;

  // cloud_core
  int normals_k = 12;

  // gp_builder
  int gp_target_points = 2048;
  double gp_mls_radius = 0.05;   // in units of the unit bounding diagonal
  int gp_mls_order = 2;
  int gpa_max_rounds = 20;
  double gpa_tol = 1e-6;

  // registration
  int icp_max_iters = 50;
  double icp_tol = 1e-9;
  double icp_trim_fraction = 0.1;
  int register_outer_iters = 5;
  int register_inner_steps = 20;

  // gfs oracle
  int gfs_steps = 10;
  double gfs_step_size = 0.5;
  double gfs_smooth_blend = 0.3;
  int gfs_smooth_k = 8;
  double label_mls_radius = 0.35;  // patch-local units
  int label_mls_order = 2;

  // patch extraction / completion
  double patch_radius_frac = 0.08;  // times the GP bounding diagonal
  int complete_iters = 5;

  // network
  NetworkConfig net;

  // loss
  LossWeights loss;
  int laplacian_k = 6;
  bool chamfer_squared = false;

  // training
  ad::AdamConfig adam;
  int train_batch = 32;
  int train_epochs = 200;
  int train_microbatch = 8;  // fixed shard size, independent of --threads
  double train_val_fraction = 0.1;

  // dataset generation
  int views_per_shape = 4;
  int view_image_size = 128;
  double noise_sigma = 0.0;
  int patches_per_shape = 64;

  /// Applies "key = value" pairs from a text file; '#' starts a comment.
  void load_file(const std::string& path);
  /// Applies one override; throws on unknown key or bad value.
  void set(const std::string& key, const std::string& value);

  /// Canonical text rendering of every key (used for the GP config hash).
  std::string serialize() const;
  std::uint64_t hash() const;
};

std::vector<int> parse_int_list(const std::string& csv);

}  // namespace gfp
