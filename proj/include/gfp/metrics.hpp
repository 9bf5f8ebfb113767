#pragma once

#include <string>
#include <vector>

#include "gfp/gp_builder.hpp"
#include "gfp/network.hpp"
#include "gfp/pipeline.hpp"
#include "gfp/point_cloud.hpp"
#include "gfp/train.hpp"

namespace gfp {

struct Config;
struct DatasetManifest;

/// One evaluation case: a partial observation with its full ground truth.
struct BenchmarkSample {
  std::string sample_id;
  std::string class_label;
  PointCloud observation;
  PointCloud ground_truth;
  std::string instance;  // groups consecutive views of one object
  int view_index = 0;
};

/// Mean distance from each completed point to its nearest ground-truth point
/// (one-directional).
double fidelity(const PointCloud& completed, const PointCloud& ground_truth);

/// Minimum chamfer distance from the completion to any library shape.
double mmd(const PointCloud& completed, const std::vector<PointCloud>& reference_library);

/// Mean chamfer distance between consecutive completions of one instance.
double consistency(const std::vector<PointCloud>& completions);

struct ReportRow {
  std::string sample_id;
  std::string class_label;
  double cd = 0.0;
  double f = 0.0;
  double mmd = 0.0;
  double c = 0.0;  // instance-level consistency, repeated on each of its rows
};

struct MethodSummary {
  std::string method;
  double mean_cd = 0.0;
  double mean_f = 0.0;
  double mean_mmd = 0.0;
  double mean_c = 0.0;
};

struct BenchmarkReport {
  std::vector<ReportRow> rows;  // completion-method rows, manifest order
  std::vector<MethodSummary> summaries;  // completion, gfs, registration_only
};

/// Completes every sample with the trained model and also runs the
/// registration-only and GFS baselines for the summary block. The MMD
/// library is the set of distinct ground-truth shapes.
BenchmarkReport run_benchmark(const GenericPrimitive& gp,
                              const std::vector<BenchmarkSample>& samples,
                              const NetworkParams& net, const Config& cfg);

/// Deterministic tab-separated rendering: header, one row per sample,
/// then a '#'-prefixed summary block.
void write_report(const BenchmarkReport& report, const std::string& path);

/// Builds benchmark samples from a manifest's test split (source = partial
/// observation, template = ground truth). Instances are sample_ids up to a
/// trailing "_view<k>" suffix.
std::vector<BenchmarkSample> benchmark_from_manifest(const DatasetManifest& manifest);

struct AblationResult {
  std::vector<std::string> config_names;  // e.g. "64,128,1024"
  std::vector<int> iteration_counts;
  std::vector<std::vector<double>> mean_cd;  // [config][iteration]
};

/// Trains each encoder layout and evaluates mean patch-level CD(MS_m, T) on
/// held-out patches at each iteration count.
AblationResult ablation_sweep(const std::vector<std::vector<int>>& encoder_layouts,
                              const std::vector<int>& iteration_counts,
                              const std::vector<TrainSample>& train_samples,
                              const std::vector<Patch>& eval_patches, const Config& cfg);

void write_ablation(const AblationResult& result, const std::string& path);

}  // namespace gfp
