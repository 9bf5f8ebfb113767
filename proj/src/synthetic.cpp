#include "gfp/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "gfp/config.hpp"
#include "gfp/gfs.hpp"
#include "gfp/kdtree.hpp"
#include "gfp/losses.hpp"
#include "gfp/pipeline.hpp"
#include "gfp/rng.hpp"

namespace gfp {

PointCloud fibonacci_sphere(std::size_t n, double radius) {
  if (n == 0) throw std::invalid_argument("empty cloud");
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.normals.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    cloud.points.push_back(radius * dir);
    cloud.normals.push_back(dir);
  }
  return cloud;
}

PointCloud ellipsoid(std::size_t n, const Vec3& semi_axes) {
  PointCloud cloud = fibonacci_sphere(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points[i] = cloud.points[i].cwiseProduct(semi_axes);
    // Surface normal of an ellipsoid: gradient direction of the implicit form.
    const Vec3 g(cloud.points[i].x() / (semi_axes.x() * semi_axes.x()),
                 cloud.points[i].y() / (semi_axes.y() * semi_axes.y()),
                 cloud.points[i].z() / (semi_axes.z() * semi_axes.z()));
    cloud.normals[i] = g.normalized();
  }
  return cloud;
}

PointCloud plane_grid(int per_side, double extent) {
  if (per_side < 2) throw std::invalid_argument("plane grid needs >= 2 points per side");
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(per_side) * per_side);
  for (int iy = 0; iy < per_side; ++iy)
    for (int ix = 0; ix < per_side; ++ix) {
      const double x = -extent + 2.0 * extent * ix / (per_side - 1);
      const double y = -extent + 2.0 * extent * iy / (per_side - 1);
      cloud.points.emplace_back(x, y, 0.0);
    }
  return cloud;
}

PointCloud cube_faces(int per_side, double half_extent) {
  if (per_side < 2) throw std::invalid_argument("cube faces need >= 2 points per side");
  PointCloud cloud;
  auto coord = [&](int i) {
    return -half_extent + 2.0 * half_extent * i / (per_side - 1);
  };
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side)
      for (int ia = 0; ia < per_side; ++ia)
        for (int ib = 0; ib < per_side; ++ib) {
          Vec3 p;
          p[axis] = side == 0 ? -half_extent : half_extent;
          p[(axis + 1) % 3] = coord(ia);
          p[(axis + 2) % 3] = coord(ib);
          cloud.points.push_back(p);
        }
  return cloud;
}

namespace {

// Sphere with unit bounding diagonal: bbox side 2R, diagonal 2R*sqrt(3) = 1.
constexpr double kUnitDiagSphereRadius = 0.28867513459481287;

// The toy family mimics scanned data: observed templates carry sensor noise
// (about 1% of the object diagonal), and sources are drawn both pristine and
// perturbed, so a trained model sees the states an iterative sweep visits.
constexpr double kToyTemplateNoise = 0.01;
constexpr double kToySourceJitter = 0.05;  // patch-local units

GenericPrimitive unit_sphere_gp(std::size_t points) {
  GenericPrimitive gp;
  gp.class_name = "sphere";
  gp.cloud = fibonacci_sphere(points, kUnitDiagSphereRadius);
  gp.source_count = 1;
  gp.target_point_count = points;
  return gp;
}

}  // namespace

std::vector<TrainSample> make_toy_patches(std::size_t count, std::uint64_t seed,
                                          const Config& cfg) {
  const std::size_t gp_points = static_cast<std::size_t>(cfg.gp_target_points);
  const GenericPrimitive gp = unit_sphere_gp(gp_points);
  const SpatialIndex gp_tree(gp.cloud);

  PatchParams pp;
  pp.radius = cfg.patch_radius_frac * bounding_diagonal(gp.cloud);
  pp.n_source = cfg.net.source_count;
  pp.m_template = cfg.net.template_count;

  LabelParams label_params;
  label_params.gfs.steps = cfg.gfs_steps;
  label_params.gfs.step_size = cfg.gfs_step_size;
  label_params.gfs.smooth_blend = cfg.gfs_smooth_blend;
  label_params.gfs.smooth_k = cfg.gfs_smooth_k;
  label_params.gfs.cutoff_radius = 1.0;  // patch-local units
  label_params.mls_radius = cfg.label_mls_radius;
  label_params.mls_order = cfg.label_mls_order;

  std::vector<TrainSample> samples;
  samples.reserve(count);

  std::uint64_t attempt = 0;
  while (samples.size() < count) {
    if (++attempt > 20 * count + 100)
      throw std::runtime_error("toy patch generation failed to produce enough samples");
    Rng rng(derive_seed(seed, attempt));

    const Vec3 axes(rng.uniform(0.65, 1.35), rng.uniform(0.65, 1.35), rng.uniform(0.65, 1.35));
    PointCloud target = ellipsoid(gp_points, axes * kUnitDiagSphereRadius);
    target = add_noise(target, kToyTemplateNoise, derive_seed(seed, 0x901ULL + attempt));
    const SpatialIndex target_tree(target);

    const std::size_t center_idx = static_cast<std::size_t>(rng.bounded(gp_points));
    pp.seed = derive_seed(seed, 0xC0FFEE00ULL + attempt);
    Patch patch = extract_patch(gp.cloud, gp_tree, target, &target_tree, center_idx, pp);
    if (patch.templ.empty()) continue;

    // Sources cover the whole refinement trajectory: pristine GP caps,
    // partially and fully advanced states (blend up to 1 anchors the
    // converged fixed point), and jittered variants so imperfect inputs get
    // pulled back onto the surface instead of drifting.
    if (rng.next_double() < 0.6) {
      GfsParams blend;
      blend.steps = 1;
      blend.step_size = rng.uniform(0.3, 1.0);
      blend.smooth_blend = 0.0;
      blend.cutoff_radius = 1.0;
      patch.source = gfs_deform(patch.source, patch.templ, blend);
    }
    if (rng.next_double() < 0.5) {
      const double sigma = rng.uniform(0.0, kToySourceJitter);
      for (Vec3& q : patch.source.points)
        q += Vec3(rng.normal(), rng.normal(), rng.normal()) * sigma;
    }

    const std::vector<PointCloud> labels = make_labels({patch}, label_params);
    const PointCloud& label = labels.front();
    if (chamfer(label, patch.templ) > chamfer(patch.source, patch.templ)) continue;

    TrainSample sample;
    sample.source = patch.source;
    sample.templ = patch.templ;
    sample.label = label;
    samples.push_back(std::move(sample));
  }
  return samples;
}

ToyBenchmark make_toy_benchmark(std::size_t n_instances, int views_per_instance,
                                std::uint64_t seed, const Config& cfg) {
  if (n_instances == 0 || views_per_instance < 1)
    throw std::invalid_argument("benchmark needs >= 1 instance and >= 1 view");

  ToyBenchmark bench;
  bench.gp = unit_sphere_gp(static_cast<std::size_t>(cfg.gp_target_points));

  for (std::size_t inst = 0; inst < n_instances; ++inst) {
    Rng rng(derive_seed(seed, 0x7055ULL + inst));
    const Vec3 axes(rng.uniform(0.65, 1.35), rng.uniform(0.65, 1.35), rng.uniform(0.65, 1.35));
    PointCloud gt = ellipsoid(2048, axes * kUnitDiagSphereRadius);

    // Place the instance rigidly: the registration stage has to recover this.
    RigidTransform t;
    const Vec3 axis = rng.unit_vector();
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    t.translation = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    t.scale = rng.uniform(0.9, 1.15);
    gt = apply_transform(gt, t);

    // Each observation is the union of two rendered views; objects stay
    // partially occluded but registration has enough support.
    const int n_views = views_per_instance + 1;
    const auto views = make_partial_views(gt, n_views, cfg.view_image_size,
                                          derive_seed(seed, 0xF1E1DULL + inst));
    for (int v = 0; v < views_per_instance; ++v) {
      BenchmarkSample s;
      s.instance = "ellipsoid_" + std::to_string(inst);
      s.sample_id = s.instance + "_view" + std::to_string(v);
      s.class_label = "ellipsoid";
      s.view_index = v;
      s.observation = views[static_cast<std::size_t>(v)];
      const auto& extra = views[static_cast<std::size_t>(v) + 1].points;
      s.observation.points.insert(s.observation.points.end(), extra.begin(), extra.end());
      s.observation = add_noise(s.observation, kToyTemplateNoise * t.scale,
                                derive_seed(seed, 0xA715ULL + inst * 31 + v));
      s.ground_truth = gt;
      bench.samples.push_back(std::move(s));
    }
  }
  return bench;
}

}  // namespace gfp
