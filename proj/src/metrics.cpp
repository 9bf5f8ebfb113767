#include "gfp/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "gfp/config.hpp"
#include "gfp/gfs.hpp"
#include "gfp/kdtree.hpp"
#include "gfp/losses.hpp"
#include "gfp/manifest.hpp"
#include "gfp/normals.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/rng.hpp"
#include "gfp/train.hpp"

namespace gfp {

double fidelity(const PointCloud& completed, const PointCloud& ground_truth) {
  if (completed.empty() || ground_truth.empty()) throw std::invalid_argument("empty cloud");
  const SpatialIndex gt_index(ground_truth);
  double acc = 0.0;
  for (const Vec3& p : completed.points) acc += gt_index.nearest(p).second;
  return acc / static_cast<double>(completed.size());
}

double mmd(const PointCloud& completed, const std::vector<PointCloud>& reference_library) {
  if (reference_library.empty()) throw std::invalid_argument("empty reference library");
  double best = std::numeric_limits<double>::infinity();
  for (const PointCloud& shape : reference_library)
    best = std::min(best, chamfer(completed, shape));
  return best;
}

double consistency(const std::vector<PointCloud>& completions) {
  if (completions.size() < 2)
    throw std::invalid_argument("consistency needs >= 2 completions");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < completions.size(); ++i)
    acc += chamfer(completions[i], completions[i + 1]);
  return acc / static_cast<double>(completions.size() - 1);
}

namespace {

struct MethodOutputs {
  std::vector<PointCloud> completions;  // one per sample, sample order
};

MethodSummary summarize(const std::string& method, const std::vector<BenchmarkSample>& samples,
                        const MethodOutputs& outs, const std::vector<PointCloud>& library,
                        std::vector<ReportRow>* rows_out) {
  // Consistency per instance over ascending view order.
  std::map<std::string, std::vector<std::pair<int, std::size_t>>> by_instance;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_instance[samples[i].instance].emplace_back(samples[i].view_index, i);

  std::map<std::string, double> instance_consistency;
  for (auto& [instance, views] : by_instance) {
    std::sort(views.begin(), views.end());
    if (views.size() < 2) {
      instance_consistency[instance] = 0.0;
      continue;
    }
    std::vector<PointCloud> ordered;
    ordered.reserve(views.size());
    for (const auto& [v, idx] : views) ordered.push_back(outs.completions[idx]);
    instance_consistency[instance] = consistency(ordered);
  }

  MethodSummary s;
  s.method = method;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ReportRow row;
    row.sample_id = samples[i].sample_id;
    row.class_label = samples[i].class_label;
    row.cd = chamfer(outs.completions[i], samples[i].ground_truth);
    row.f = fidelity(outs.completions[i], samples[i].ground_truth);
    row.mmd = mmd(outs.completions[i], library);
    row.c = instance_consistency[samples[i].instance];
    s.mean_cd += row.cd;
    s.mean_f += row.f;
    s.mean_mmd += row.mmd;
    s.mean_c += row.c;
    if (rows_out) rows_out->push_back(std::move(row));
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  s.mean_cd *= inv;
  s.mean_f *= inv;
  s.mean_mmd *= inv;
  s.mean_c *= inv;
  return s;
}

}  // namespace

BenchmarkReport run_benchmark(const GenericPrimitive& gp,
                              const std::vector<BenchmarkSample>& samples,
                              const NetworkParams& net, const Config& cfg) {
  if (samples.empty()) throw std::invalid_argument("empty test set");

  // MMD reference library: distinct ground-truth shapes, instance order.
  std::vector<PointCloud> library;
  {
    std::map<std::string, std::size_t> seen;
    for (const BenchmarkSample& s : samples)
      if (seen.emplace(s.instance, library.size()).second) library.push_back(s.ground_truth);
  }

  RegisterParams reg;
  reg.outer_iters = cfg.register_outer_iters;
  reg.inner_steps = cfg.register_inner_steps;
  reg.tol = cfg.icp_tol;
  reg.trim_fraction = cfg.icp_trim_fraction;

  CompleteParams cp;
  cp.registration = reg;
  cp.patch_radius_frac = cfg.patch_radius_frac;
  cp.n_source = net.config.source_count;
  cp.m_template = net.config.template_count;
  cp.m_iters = cfg.complete_iters;
  cp.seed = cfg.seed;
  cp.threads = cfg.threads;

  GfsParams gfs;
  gfs.steps = cfg.gfs_steps;
  gfs.step_size = cfg.gfs_step_size;
  gfs.smooth_blend = cfg.gfs_smooth_blend;
  gfs.smooth_k = cfg.gfs_smooth_k;

  MethodOutputs net_out, gfs_out, reg_out;
  net_out.completions.resize(samples.size());
  gfs_out.completions.resize(samples.size());
  reg_out.completions.resize(samples.size());

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const BenchmarkSample& s = samples[i];
    const PointCloud registered = register_gp(gp, s.observation, reg);
    reg_out.completions[i] = registered;

    // GFS baseline deforms the registered GP toward the observation; template
    // influence is limited to the patch radius, as in patch modeling.
    PointCloud reg_with_normals = registered;
    if (!reg_with_normals.has_normals())
      reg_with_normals = estimate_normals(reg_with_normals, cfg.normals_k).cloud;
    GfsParams g2 = gfs;
    g2.cutoff_radius = cfg.patch_radius_frac * bounding_diagonal(registered);
    gfs_out.completions[i] = gfs_deform(reg_with_normals, s.observation, g2);

    net_out.completions[i] = complete_shape(gp, s.observation, net, cp);
  }

  BenchmarkReport report;
  report.summaries.push_back(summarize("gfpnet", samples, net_out, library, &report.rows));
  report.summaries.push_back(summarize("gfs", samples, gfs_out, library, nullptr));
  report.summaries.push_back(
      summarize("registration_only", samples, reg_out, library, nullptr));
  return report;
}

void write_report(const BenchmarkReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "sample_id\tclass\tCD\tF\tMMD\tC\n";
  for (const ReportRow& r : report.rows) {
    out << r.sample_id << '\t' << r.class_label << '\t' << format_coord(r.cd) << '\t'
        << format_coord(r.f) << '\t' << format_coord(r.mmd) << '\t' << format_coord(r.c) << '\n';
  }
  for (const MethodSummary& s : report.summaries) {
    out << "# mean\t" << s.method << "\tCD=" << format_coord(s.mean_cd)
        << "\tF=" << format_coord(s.mean_f) << "\tMMD=" << format_coord(s.mean_mmd)
        << "\tC=" << format_coord(s.mean_c) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<BenchmarkSample> benchmark_from_manifest(const DatasetManifest& manifest) {
  std::vector<BenchmarkSample> samples;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != Split::kTest) continue;
    BenchmarkSample s;
    s.sample_id = e.sample_id;
    s.class_label = e.class_label;
    s.observation = read_ply(e.source_path);
    s.ground_truth = read_ply(e.template_path);
    const auto pos = e.sample_id.rfind("_view");
    if (pos != std::string::npos) {
      s.instance = e.sample_id.substr(0, pos);
      try {
        s.view_index = std::stoi(e.sample_id.substr(pos + 5));
      } catch (...) {
        s.view_index = 0;
      }
    } else {
      s.instance = e.sample_id;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

AblationResult ablation_sweep(const std::vector<std::vector<int>>& encoder_layouts,
                              const std::vector<int>& iteration_counts,
                              const std::vector<TrainSample>& train_samples,
                              const std::vector<Patch>& eval_patches, const Config& cfg) {
  if (encoder_layouts.empty() || iteration_counts.empty())
    throw std::invalid_argument("ablation needs >= 1 layout and >= 1 iteration count");
  if (eval_patches.empty()) throw std::invalid_argument("ablation needs evaluation patches");

  AblationResult result;
  result.iteration_counts = iteration_counts;

  for (const std::vector<int>& layout : encoder_layouts) {
    NetworkConfig nc = cfg.net;
    nc.iterative = true;
    nc.iterative_encoder_widths = layout;
    // Match the decoder entry width to the pooled feature size.
    const TrainResult trained = train(train_samples, nc, cfg);

    std::string name;
    for (std::size_t i = 0; i < layout.size(); ++i)
      name += (i ? "," : "") + std::to_string(layout[i]);
    result.config_names.push_back(name);

    std::vector<double> row;
    for (int iters : iteration_counts) {
      double acc = 0.0;
      std::size_t counted = 0;
      for (const Patch& patch : eval_patches) {
        if (patch.templ.empty()) continue;
        const PointCloud modeled = iterative_complete(trained.params, patch, iters);
        acc += chamfer(modeled, patch.templ);
        ++counted;
      }
      row.push_back(counted ? acc / static_cast<double>(counted) : 0.0);
    }
    result.mean_cd.push_back(std::move(row));
  }
  return result;
}

void write_ablation(const AblationResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write ablation table: " + path);
  out << "encoder";
  for (int it : result.iteration_counts) out << "\titers=" << it;
  out << '\n';
  for (std::size_t c = 0; c < result.config_names.size(); ++c) {
    out << result.config_names[c];
    for (double v : result.mean_cd[c]) out << '\t' << format_coord(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gfp
