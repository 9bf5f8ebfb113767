// Command-line front end for the shape completion pipeline.

#include <CLI11.hpp>
#include <clocale>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gfp/config.hpp"
#include "gfp/gp_builder.hpp"
#include "gfp/manifest.hpp"
#include "gfp/metrics.hpp"
#include "gfp/network.hpp"
#include "gfp/pipeline.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/registration.hpp"
#include "gfp/selftest.hpp"
#include "gfp/synthetic.hpp"
#include "gfp/train.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  bool has_seed = false;
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool require_seed) {
  cmd->add_option("--config", flags.config_path, "key = value config file");
  cmd->add_option("--set", flags.overrides, "config override key=value (repeatable)");
  auto* seed_opt = cmd->add_option("--seed", flags.seed, "rng seed");
  if (require_seed) seed_opt->required();
  seed_opt->each([&flags](const std::string&) { flags.has_seed = true; });
  cmd->add_option("--threads", flags.threads, "worker thread cap");
}

gfp::Config make_config(const CommonFlags& flags) {
  gfp::Config cfg;
  if (!flags.config_path.empty()) cfg.load_file(flags.config_path);
  for (const std::string& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  // Flags win over the config file.
  if (flags.has_seed) cfg.seed = flags.seed;
  if (flags.threads > 0) cfg.threads = flags.threads;
  return cfg;
}

std::vector<gfp::PointCloud> load_shape_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ply")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<gfp::PointCloud> shapes;
  shapes.reserve(paths.size());
  for (const std::string& p : paths) shapes.push_back(gfp::read_ply(p));
  if (shapes.empty()) throw std::runtime_error("no .ply shapes found in " + dir);
  return shapes;
}

gfp::RegisterParams register_params(const gfp::Config& cfg) {
  gfp::RegisterParams reg;
  reg.outer_iters = cfg.register_outer_iters;
  reg.inner_steps = cfg.register_inner_steps;
  reg.tol = cfg.icp_tol;
  reg.trim_fraction = cfg.icp_trim_fraction;
  return reg;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"Generic-primitive shape completion pipeline"};
  app.require_subcommand(1);

  // ---- build-gp
  auto* cmd_gp = app.add_subcommand("build-gp", "average shapes into a generic primitive");
  CommonFlags gp_flags;
  std::string gp_shapes_dir, gp_class = "object", gp_out, gp_meta;
  cmd_gp->add_option("--shapes", gp_shapes_dir, "directory of .ply shapes")->required();
  cmd_gp->add_option("--class", gp_class, "object class name");
  cmd_gp->add_option("--out", gp_out, "output GP .ply path")->required();
  cmd_gp->add_option("--meta", gp_meta, "metadata path (default: <out>.meta)");
  add_common(cmd_gp, gp_flags, false);

  // ---- make-dataset
  auto* cmd_ds = app.add_subcommand("make-dataset", "generate training patches and test views");
  CommonFlags ds_flags;
  std::string ds_shapes_dir, ds_class = "object", ds_gp, ds_gp_meta, ds_out;
  std::size_t ds_toy_patches = 0, ds_toy_instances = 0;
  int ds_toy_views = 4;
  cmd_ds->add_option("--shapes", ds_shapes_dir, "directory of .ply shapes");
  cmd_ds->add_option("--class", ds_class, "object class name");
  cmd_ds->add_option("--gp", ds_gp, "generic primitive .ply");
  cmd_ds->add_option("--gp-meta", ds_gp_meta, "generic primitive metadata");
  cmd_ds->add_option("--out", ds_out, "output directory")->required();
  cmd_ds->add_option("--toy-patches", ds_toy_patches,
                     "generate this many synthetic sphere-to-ellipsoid training patches");
  cmd_ds->add_option("--toy-instances", ds_toy_instances,
                     "generate a toy test split with this many ellipsoid instances");
  cmd_ds->add_option("--toy-views", ds_toy_views, "views per toy test instance");
  add_common(cmd_ds, ds_flags, true);

  // ---- train
  auto* cmd_tr = app.add_subcommand("train", "train the completion network");
  CommonFlags tr_flags;
  std::string tr_manifest, tr_out = "model.bin", tr_curve;
  int tr_epochs = 0, tr_batch = 0;
  cmd_tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  cmd_tr->add_option("--out", tr_out, "checkpoint output path");
  cmd_tr->add_option("--curve", tr_curve, "loss curve output path (default: <out>.curve.tsv)");
  cmd_tr->add_option("--epochs", tr_epochs, "override train.epochs");
  cmd_tr->add_option("--batch", tr_batch, "override train.batch");
  add_common(cmd_tr, tr_flags, true);

  // ---- complete
  auto* cmd_co = app.add_subcommand("complete", "complete one observation with a trained model");
  CommonFlags co_flags;
  std::string co_gp, co_gp_meta, co_obs, co_ckpt, co_out = "mgp.ply";
  int co_iters = 0;
  cmd_co->add_option("--gp", co_gp, "generic primitive .ply")->required();
  cmd_co->add_option("--gp-meta", co_gp_meta, "generic primitive metadata");
  cmd_co->add_option("--obs", co_obs, "observation .ply")->required();
  cmd_co->add_option("--ckpt", co_ckpt, "trained checkpoint")->required();
  cmd_co->add_option("--iters", co_iters, "refinement iterations (default from config)");
  cmd_co->add_option("--out", co_out, "output MGP .ply");
  add_common(cmd_co, co_flags, true);

  // ---- evaluate
  auto* cmd_ev = app.add_subcommand("evaluate", "run the benchmark metrics over a test split");
  CommonFlags ev_flags;
  std::string ev_manifest, ev_gp, ev_gp_meta, ev_ckpt, ev_out = "report.tsv";
  cmd_ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  cmd_ev->add_option("--gp", ev_gp, "generic primitive .ply")->required();
  cmd_ev->add_option("--gp-meta", ev_gp_meta, "generic primitive metadata");
  cmd_ev->add_option("--ckpt", ev_ckpt, "trained checkpoint")->required();
  cmd_ev->add_option("--out", ev_out, "report output path");
  add_common(cmd_ev, ev_flags, true);

  // ---- ablate
  auto* cmd_ab = app.add_subcommand("ablate", "encoder layout x iteration sweep");
  CommonFlags ab_flags;
  std::string ab_manifest, ab_layers = "64,128;64,128,1024", ab_iters = "1,5",
              ab_out = "ablation.tsv";
  cmd_ab->add_option("--manifest", ab_manifest, "dataset manifest")->required();
  cmd_ab->add_option("--layers", ab_layers, "encoder layouts, ';'-separated width lists");
  cmd_ab->add_option("--iters", ab_iters, "iteration counts, comma-separated");
  cmd_ab->add_option("--out", ab_out, "output table path");
  add_common(cmd_ab, ab_flags, true);

  // ---- selftest
  auto* cmd_st = app.add_subcommand("selftest", "oracle-equivalence and gradient checks");
  CommonFlags st_flags;
  add_common(cmd_st, st_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_gp) {
      const gfp::Config cfg = make_config(gp_flags);
      const auto shapes = load_shape_dir(gp_shapes_dir);
      const gfp::GenericPrimitive gp = gfp::build_gp(gp_class, shapes, cfg);
      const std::string meta = gp_meta.empty() ? gp_out + ".meta" : gp_meta;
      gfp::save_gp(gp, gp_out, meta, cfg.hash());
      std::printf("gp %s: %zu points from %d shapes -> %s\n", gp.class_name.c_str(),
                  gp.cloud.size(), gp.source_count, gp_out.c_str());
    } else if (*cmd_ds) {
      const gfp::Config cfg = make_config(ds_flags);
      if (ds_toy_patches > 0 || ds_toy_instances > 0) {
        fs::create_directories(ds_out);
        gfp::DatasetManifest manifest;
        if (ds_toy_patches > 0) {
          const auto samples = gfp::make_toy_patches(ds_toy_patches, cfg.seed, cfg);
          for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::string tag = "toy_" + std::to_string(i);
            const std::string s_path = ds_out + "/" + tag + "_s.ply";
            const std::string t_path = ds_out + "/" + tag + "_t.ply";
            const std::string l_path = ds_out + "/" + tag + "_l.ply";
            gfp::write_ply(samples[i].source, s_path);
            gfp::write_ply(samples[i].templ, t_path);
            gfp::write_ply(samples[i].label, l_path);
            manifest.entries.push_back(
                {tag, "toy", s_path, t_path, l_path, gfp::Split::kTrain});
          }
        }
        if (ds_toy_instances > 0) {
          const auto bench =
              gfp::make_toy_benchmark(ds_toy_instances, ds_toy_views, cfg.seed, cfg);
          gfp::save_gp(bench.gp, ds_out + "/gp_sphere.ply", ds_out + "/gp_sphere.ply.meta",
                       cfg.hash());
          std::map<std::string, std::string> gt_paths;
          for (const auto& s : bench.samples) {
            if (!gt_paths.count(s.instance)) {
              const std::string gt = ds_out + "/" + s.instance + "_gt.ply";
              gfp::write_ply(s.ground_truth, gt);
              gt_paths[s.instance] = gt;
            }
            const std::string obs = ds_out + "/" + s.sample_id + ".ply";
            gfp::write_ply(s.observation, obs);
            manifest.entries.push_back({s.sample_id, s.class_label, obs,
                                        gt_paths[s.instance], "", gfp::Split::kTest});
          }
        }
        gfp::save_manifest(manifest, ds_out + "/manifest.tsv");
        std::printf("dataset: %zu entries -> %s/manifest.tsv\n", manifest.entries.size(),
                    ds_out.c_str());
      } else {
        if (ds_shapes_dir.empty() || ds_gp.empty())
          throw std::runtime_error("make-dataset needs --shapes and --gp (or --toy-patches)");
        const auto shapes = load_shape_dir(ds_shapes_dir);
        const gfp::GenericPrimitive gp =
            gfp::load_gp(ds_gp, ds_gp_meta.empty() ? ds_gp + ".meta" : ds_gp_meta);
        const auto manifest = gfp::build_dataset(ds_class, shapes, gp, cfg, ds_out);
        std::printf("dataset: %zu entries -> %s/manifest.tsv\n", manifest.entries.size(),
                    ds_out.c_str());
      }
    } else if (*cmd_tr) {
      gfp::Config cfg = make_config(tr_flags);
      if (tr_epochs > 0) cfg.train_epochs = tr_epochs;
      if (tr_batch > 0) cfg.train_batch = tr_batch;
      const auto manifest = gfp::load_manifest(tr_manifest);
      const auto samples = gfp::load_train_samples(manifest);
      const gfp::TrainResult result = gfp::train(samples, cfg.net, cfg);
      gfp::save_checkpoint(result.params, tr_out);
      gfp::save_loss_curve(result, tr_curve.empty() ? tr_out + ".curve.tsv" : tr_curve);
      std::printf("train: %zu samples, %d epochs, final loss %.6g -> %s\n", samples.size(),
                  cfg.train_epochs,
                  result.train_curve.empty() ? 0.0 : result.train_curve.back(), tr_out.c_str());
    } else if (*cmd_co) {
      gfp::Config cfg = make_config(co_flags);
      if (co_iters > 0) cfg.complete_iters = co_iters;
      const gfp::GenericPrimitive gp =
          gfp::load_gp(co_gp, co_gp_meta.empty() ? co_gp + ".meta" : co_gp_meta);
      const gfp::PointCloud obs = gfp::read_ply(co_obs);
      const gfp::NetworkParams net = gfp::load_checkpoint(co_ckpt);
      gfp::CompleteParams cp;
      cp.registration = register_params(cfg);
      cp.patch_radius_frac = cfg.patch_radius_frac;
      cp.n_source = net.config.source_count;
      cp.m_template = net.config.template_count;
      cp.m_iters = cfg.complete_iters;
      cp.seed = cfg.seed;
      cp.threads = cfg.threads;
      const gfp::PointCloud mgp = gfp::complete_shape(gp, obs, net, cp);
      gfp::write_ply(mgp, co_out);
      std::printf("complete: %zu points -> %s\n", mgp.size(), co_out.c_str());
    } else if (*cmd_ev) {
      const gfp::Config cfg = make_config(ev_flags);
      const auto manifest = gfp::load_manifest(ev_manifest);
      const auto samples = gfp::benchmark_from_manifest(manifest);
      const gfp::GenericPrimitive gp =
          gfp::load_gp(ev_gp, ev_gp_meta.empty() ? ev_gp + ".meta" : ev_gp_meta);
      const gfp::NetworkParams net = gfp::load_checkpoint(ev_ckpt);
      const gfp::BenchmarkReport report = gfp::run_benchmark(gp, samples, net, cfg);
      gfp::write_report(report, ev_out);
      std::printf("evaluate: %zu samples -> %s\n", samples.size(), ev_out.c_str());
    } else if (*cmd_ab) {
      const gfp::Config cfg = make_config(ab_flags);
      const auto manifest = gfp::load_manifest(ab_manifest);
      auto samples = gfp::load_train_samples(manifest);
      if (samples.empty()) throw std::runtime_error("manifest has no train entries");

      std::vector<std::vector<int>> layouts;
      std::stringstream ss(ab_layers);
      std::string part;
      while (std::getline(ss, part, ';'))
        if (!part.empty()) layouts.push_back(gfp::parse_int_list(part));
      const std::vector<int> iters = gfp::parse_int_list(ab_iters);

      // Hold out one fifth of the samples as evaluation patches.
      gfp::Rng rng(gfp::derive_seed(cfg.seed, 0xAB1A7E));
      std::vector<std::size_t> order(samples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      const std::size_t n_eval = std::max<std::size_t>(1, samples.size() / 5);
      std::vector<gfp::Patch> eval_patches;
      std::vector<gfp::TrainSample> train_samples;
      for (std::size_t r = 0; r < order.size(); ++r) {
        const gfp::TrainSample& s = samples[order[r]];
        if (r < n_eval) {
          gfp::Patch p;
          p.source = s.source;
          p.templ = s.templ;
          p.radius = 1.0;
          eval_patches.push_back(std::move(p));
        } else {
          train_samples.push_back(s);
        }
      }
      const gfp::AblationResult table =
          gfp::ablation_sweep(layouts, iters, train_samples, eval_patches, cfg);
      gfp::write_ablation(table, ab_out);
      std::printf("ablate: %zu layouts x %zu iteration counts -> %s\n", layouts.size(),
                  iters.size(), ab_out.c_str());
    } else if (*cmd_st) {
      gfp::Config cfg = make_config(st_flags);
      const auto suites = gfp::run_selftest(cfg.seed == 0 ? 20260811u : cfg.seed);
      int failures = 0;
      for (const auto& s : suites) failures += s.failures;
      if (failures > 0) {
        std::fprintf(stderr, "selftest: %d failures\n", failures);
        return 1;
      }
      std::printf("selftest: all suites passed\n");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
