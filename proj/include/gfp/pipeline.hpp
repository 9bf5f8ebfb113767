#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfp/gp_builder.hpp"
#include "gfp/kdtree.hpp"
#include "gfp/network.hpp"
#include "gfp/patch.hpp"
#include "gfp/point_cloud.hpp"
#include "gfp/registration.hpp"

namespace gfp {

struct Config;
struct DatasetManifest;

struct PatchParams {
  double radius = 0.08;
  int n_source = 64;
  int m_template = 64;
  std::uint64_t seed = 0;
};

/// Extracts the patch around GP point `gp_index`. The source keeps the center
/// point at slot 0 and is brought to exactly n_source points (draws with
/// replacement when larger, cyclic repetition when smaller); the template is
/// normalized to m_template points or left empty. Coordinates are local:
/// (q - center) / radius.
Patch extract_patch(const PointCloud& gp, const SpatialIndex& gp_index_tree,
                    const PointCloud& observation, const SpatialIndex* obs_index_tree,
                    std::size_t gp_index, const PatchParams& params);

/// One patch per GP point, in GP index order.
std::vector<Patch> extract_patches(const PointCloud& gp_registered,
                                   const PointCloud& observation, const PatchParams& params);

struct CompleteParams {
  RegisterParams registration;
  double patch_radius_frac = 0.08;  // times the registered GP bounding diagonal
  int n_source = 64;
  int m_template = 64;
  int m_iters = 5;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Registers the GP onto the observation, models every patch and commits the
/// new center position per patch. The result has the GP's point count and
/// order and is independent of patch processing order.
PointCloud complete_shape(const GenericPrimitive& gp, const PointCloud& observation,
                          const NetworkParams& net, const CompleteParams& params);

/// Orthographic depth render from one viewpoint: points splat 3x3 pixels into
/// a z-buffer, the nearest-depth owner survives per pixel, and surviving
/// points are back-projected (a subset of the input shape).
PointCloud render_view(const PointCloud& shape, const Vec3& eye, int image_size);

/// Synthetic single-viewpoint scans from viewpoints drawn on a sphere of
/// radius 2x the bounding diagonal around the centroid.
std::vector<PointCloud> make_partial_views(const PointCloud& shape, int n_views, int image_size,
                                           std::uint64_t seed);

/// i.i.d. zero-mean Gaussian perturbation, standard deviation sigma per
/// coordinate. sigma = 0 is the identity.
PointCloud add_noise(const PointCloud& shape, double sigma, std::uint64_t seed);

/// Splits shapes 75/25, extracts training patches with GFS labels from the
/// train split and partial views from the test split, writes all PLYs under
/// out_dir and returns the manifest (also saved as out_dir/manifest.tsv).
DatasetManifest build_dataset(const std::string& class_name,
                              const std::vector<PointCloud>& shapes, const GenericPrimitive& gp,
                              const Config& cfg, const std::string& out_dir);

}  // namespace gfp
