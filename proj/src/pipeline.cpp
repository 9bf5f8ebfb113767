#include "gfp/pipeline.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>

#include "gfp/config.hpp"
#include "gfp/gfs.hpp"
#include "gfp/losses.hpp"
#include "gfp/manifest.hpp"
#include "gfp/parallel.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/rng.hpp"

namespace gfp {

namespace {

// Candidates ordered by (distance to center, index).
std::vector<std::size_t> ordered_candidates(const PointCloud& cloud,
                                            const std::vector<std::size_t>& indices,
                                            const Vec3& center) {
  std::vector<std::pair<double, std::size_t>> by_dist;
  by_dist.reserve(indices.size());
  for (std::size_t idx : indices)
    by_dist.emplace_back((cloud.points[idx] - center).squaredNorm(), idx);
  std::sort(by_dist.begin(), by_dist.end());
  std::vector<std::size_t> out;
  out.reserve(by_dist.size());
  for (const auto& [d, idx] : by_dist) out.push_back(idx);
  return out;
}

}  // namespace

Patch extract_patch(const PointCloud& gp, const SpatialIndex& gp_index_tree,
                    const PointCloud& observation, const SpatialIndex* obs_index_tree,
                    std::size_t gp_index, const PatchParams& params) {
  if (!(params.radius > 0.0)) throw std::invalid_argument("non-positive radius");
  const Vec3 center = gp.points[gp_index];
  const double inv_r = 1.0 / params.radius;

  Patch patch;
  patch.center = center;
  patch.radius = params.radius;
  patch.gp_index = gp_index;

  // Source candidates: the center first, the rest by (distance, index).
  auto src_cand = ordered_candidates(gp, gp_index_tree.radius_search(center, params.radius),
                                     center);
  const auto self = std::find(src_cand.begin(), src_cand.end(), gp_index);
  if (self != src_cand.end()) src_cand.erase(self);
  src_cand.insert(src_cand.begin(), gp_index);

  Rng rng(derive_seed(params.seed, gp_index));
  const std::size_t n = static_cast<std::size_t>(params.n_source);

  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  if (src_cand.size() == n) {
    chosen = src_cand;
  } else if (src_cand.size() > n) {
    chosen.push_back(gp_index);  // the modeled point always keeps slot 0
    for (std::size_t j = 1; j < n; ++j)
      chosen.push_back(src_cand[static_cast<std::size_t>(rng.bounded(src_cand.size()))]);
  } else {
    for (std::size_t j = 0; j < n; ++j) chosen.push_back(src_cand[j % src_cand.size()]);
  }

  patch.source.points.reserve(n);
  const bool with_normals = gp.has_normals();
  if (with_normals) patch.source.normals.reserve(n);
  for (std::size_t idx : chosen) {
    patch.source.points.push_back((gp.points[idx] - center) * inv_r);
    if (with_normals) patch.source.normals.push_back(gp.normals[idx]);
  }

  if (obs_index_tree && !observation.empty()) {
    auto tmpl_cand = ordered_candidates(
        observation, obs_index_tree->radius_search(center, params.radius), center);
    if (!tmpl_cand.empty()) {
      const std::size_t m = static_cast<std::size_t>(params.m_template);
      std::vector<std::size_t> tchosen;
      tchosen.reserve(m);
      if (tmpl_cand.size() == m) {
        tchosen = tmpl_cand;
      } else if (tmpl_cand.size() > m) {
        for (std::size_t j = 0; j < m; ++j)
          tchosen.push_back(tmpl_cand[static_cast<std::size_t>(rng.bounded(tmpl_cand.size()))]);
      } else {
        for (std::size_t j = 0; j < m; ++j) tchosen.push_back(tmpl_cand[j % tmpl_cand.size()]);
      }
      patch.templ.points.reserve(m);
      for (std::size_t idx : tchosen)
        patch.templ.points.push_back((observation.points[idx] - center) * inv_r);
    }
  }
  return patch;
}

std::vector<Patch> extract_patches(const PointCloud& gp_registered,
                                   const PointCloud& observation, const PatchParams& params) {
  if (gp_registered.empty()) throw std::invalid_argument("empty cloud");
  const SpatialIndex gp_tree(gp_registered);
  std::optional<SpatialIndex> obs_tree;
  if (!observation.empty()) obs_tree.emplace(observation);

  std::vector<Patch> patches;
  patches.reserve(gp_registered.size());
  for (std::size_t i = 0; i < gp_registered.size(); ++i)
    patches.push_back(extract_patch(gp_registered, gp_tree, observation,
                                    obs_tree ? &*obs_tree : nullptr, i, params));
  return patches;
}

PointCloud complete_shape(const GenericPrimitive& gp, const PointCloud& observation,
                          const NetworkParams& net, const CompleteParams& params) {
  if (observation.empty()) throw std::invalid_argument("empty cloud");
  const PointCloud registered = register_gp(gp, observation, params.registration);

  PatchParams pp;
  pp.radius = params.patch_radius_frac * bounding_diagonal(registered);
  pp.n_source = params.n_source;
  pp.m_template = params.m_template;
  pp.seed = params.seed;
  const std::vector<Patch> patches = extract_patches(registered, observation, pp);

  PointCloud mgp;
  mgp.points = registered.points;

  parallel_for(patches.size(), params.threads, [&](std::size_t i) {
    const Patch& patch = patches[i];
    const PointCloud modeled = iterative_complete(net, patch, params.m_iters);
    // Commit only the center: overlapping patches never write the same index.
    mgp.points[patch.gp_index] = patch.center + patch.radius * modeled.points[0];
  });
  return mgp;
}

PointCloud render_view(const PointCloud& shape, const Vec3& eye, int image_size) {
  if (shape.size() < 10) throw std::invalid_argument("shape needs >= 10 points for rendering");
  if (image_size < 8) throw std::invalid_argument("image size too small");

  const Vec3 center = centroid(shape);
  const Vec3 w = (center - eye).normalized();
  int smallest = 0;
  w.cwiseAbs().minCoeff(&smallest);
  const Vec3 u = w.cross(Vec3::Unit(smallest)).normalized();
  const Vec3 vv = w.cross(u);

  const std::size_t n = shape.size();
  std::vector<double> iu(n), iv(n), d(n);
  double min_u = std::numeric_limits<double>::infinity(), max_u = -min_u;
  double min_v = min_u, max_v = -min_u;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 rel = shape.points[i] - eye;
    iu[i] = rel.dot(u);
    iv[i] = rel.dot(vv);
    d[i] = rel.dot(w);
    min_u = std::min(min_u, iu[i]);
    max_u = std::max(max_u, iu[i]);
    min_v = std::min(min_v, iv[i]);
    max_v = std::max(max_v, iv[i]);
  }
  const double extent = std::max(max_u - min_u, max_v - min_v);
  const double px_scale = extent > 0.0 ? static_cast<double>(image_size - 4) / extent : 1.0;

  struct Pixel {
    double depth = std::numeric_limits<double>::infinity();
    std::size_t owner = SpatialIndex::npos;
  };
  std::vector<Pixel> zbuf(static_cast<std::size_t>(image_size) * image_size);

  for (std::size_t i = 0; i < n; ++i) {
    const int cx = static_cast<int>(std::lround((iu[i] - min_u) * px_scale)) + 2;
    const int cy = static_cast<int>(std::lround((iv[i] - min_v) * px_scale)) + 2;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= image_size || y >= image_size) continue;
        Pixel& p = zbuf[static_cast<std::size_t>(y) * image_size + x];
        if (d[i] < p.depth) {  // strict: equal depth keeps the earlier (lower) index
          p.depth = d[i];
          p.owner = i;
        }
      }
    }
  }

  std::vector<std::size_t> owners;
  for (const Pixel& p : zbuf)
    if (p.owner != SpatialIndex::npos) owners.push_back(p.owner);
  std::sort(owners.begin(), owners.end());
  owners.erase(std::unique(owners.begin(), owners.end()), owners.end());

  PointCloud view;
  view.points.reserve(owners.size());
  for (std::size_t i : owners) view.points.push_back(eye + iu[i] * u + iv[i] * vv + d[i] * w);
  return view;
}

std::vector<PointCloud> make_partial_views(const PointCloud& shape, int n_views, int image_size,
                                           std::uint64_t seed) {
  if (shape.size() < 10) throw std::invalid_argument("shape needs >= 10 points for rendering");
  if (n_views < 1) throw std::invalid_argument("n_views must be >= 1");

  const Vec3 center = centroid(shape);
  const double diag = bounding_diagonal(shape);
  Rng rng(seed);

  std::vector<PointCloud> views;
  views.reserve(static_cast<std::size_t>(n_views));
  for (int v = 0; v < n_views; ++v) {
    const Vec3 eye = center + rng.unit_vector() * (2.0 * diag);
    views.push_back(render_view(shape, eye, image_size));
  }
  return views;
}

PointCloud add_noise(const PointCloud& shape, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  PointCloud out = shape;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (Vec3& p : out.points)
    p += Vec3(rng.normal() * sigma, rng.normal() * sigma, rng.normal() * sigma);
  return out;
}

DatasetManifest build_dataset(const std::string& class_name,
                              const std::vector<PointCloud>& shapes, const GenericPrimitive& gp,
                              const Config& cfg, const std::string& out_dir) {
  if (shapes.size() < 4) throw std::invalid_argument("need >= 4 shapes per class");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<std::size_t> order(shapes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(cfg.seed, 0x5917));
  split_rng.shuffle(order);
  const std::size_t n_test = std::max<std::size_t>(1, shapes.size() / 4);

  DatasetManifest manifest;
  LabelParams label_params;
  label_params.gfs.steps = cfg.gfs_steps;
  label_params.gfs.step_size = cfg.gfs_step_size;
  label_params.gfs.smooth_blend = cfg.gfs_smooth_blend;
  label_params.gfs.smooth_k = cfg.gfs_smooth_k;
  label_params.gfs.cutoff_radius = 1.0;  // patch-local units: the patch radius
  label_params.mls_radius = cfg.label_mls_radius;
  label_params.mls_order = cfg.label_mls_order;

  RegisterParams reg;
  reg.outer_iters = cfg.register_outer_iters;
  reg.inner_steps = cfg.register_inner_steps;
  reg.tol = cfg.icp_tol;
  reg.trim_fraction = cfg.icp_trim_fraction;

  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t shape_idx = order[rank];
    const bool is_test = rank < n_test;
    const std::string shape_tag = class_name + "_" + std::to_string(shape_idx);
    const PointCloud& shape = shapes[shape_idx];

    if (is_test) {
      const std::string gt_path = out_dir + "/" + shape_tag + "_gt.ply";
      write_ply(shape, gt_path);
      const auto views = make_partial_views(shape, cfg.views_per_shape, cfg.view_image_size,
                                            derive_seed(cfg.seed, 0xBEEF00 + shape_idx));
      for (std::size_t v = 0; v < views.size(); ++v) {
        PointCloud obs = views[v];
        if (cfg.noise_sigma > 0.0)
          obs = add_noise(obs, cfg.noise_sigma,
                          derive_seed(cfg.seed, 0xAB0000 + shape_idx * 97 + v));
        const std::string obs_path =
            out_dir + "/" + shape_tag + "_view" + std::to_string(v) + ".ply";
        write_ply(obs, obs_path);
        ManifestEntry e;
        e.sample_id = shape_tag + "_view" + std::to_string(v);
        e.class_label = class_name;
        e.source_path = obs_path;
        e.template_path = gt_path;
        e.split = Split::kTest;
        manifest.entries.push_back(std::move(e));
      }
      continue;
    }

    PointCloud train_shape = shape;
    if (cfg.noise_sigma > 0.0)
      train_shape = add_noise(train_shape, cfg.noise_sigma,
                              derive_seed(cfg.seed, 0xCD0000 + shape_idx));

    const PointCloud registered = register_gp(gp, train_shape, reg);
    PatchParams pp;
    pp.radius = cfg.patch_radius_frac * bounding_diagonal(registered);
    pp.n_source = cfg.net.source_count;
    pp.m_template = cfg.net.template_count;
    pp.seed = derive_seed(cfg.seed, 0xEF0000 + shape_idx);
    const std::vector<Patch> all_patches = extract_patches(registered, train_shape, pp);

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < all_patches.size(); ++i)
      if (!all_patches[i].templ.empty()) usable.push_back(i);
    Rng pick_rng(derive_seed(cfg.seed, 0xF00D00 + shape_idx));
    pick_rng.shuffle(usable);
    if (usable.size() > static_cast<std::size_t>(cfg.patches_per_shape))
      usable.resize(static_cast<std::size_t>(cfg.patches_per_shape));
    std::sort(usable.begin(), usable.end());

    std::vector<Patch> selected;
    selected.reserve(usable.size());
    for (std::size_t i : usable) selected.push_back(all_patches[i]);
    const std::vector<PointCloud> labels = make_labels(selected, label_params);

    for (std::size_t q = 0; q < selected.size(); ++q) {
      const Patch& patch = selected[q];
      // Quality gate: only keep labels that improve on the raw source.
      if (chamfer(labels[q], patch.templ) > chamfer(patch.source, patch.templ)) continue;

      const std::string tag = shape_tag + "_p" + std::to_string(patch.gp_index);
      const std::string s_path = out_dir + "/" + tag + "_s.ply";
      const std::string t_path = out_dir + "/" + tag + "_t.ply";
      const std::string l_path = out_dir + "/" + tag + "_l.ply";
      write_ply(patch.source, s_path);
      write_ply(patch.templ, t_path);
      write_ply(labels[q], l_path);
      ManifestEntry e;
      e.sample_id = tag;
      e.class_label = class_name;
      e.source_path = s_path;
      e.template_path = t_path;
      e.label_path = l_path;
      e.split = Split::kTrain;
      manifest.entries.push_back(std::move(e));
    }
  }

  save_manifest(manifest, out_dir + "/manifest.tsv");
  return manifest;
}

}  // namespace gfp
