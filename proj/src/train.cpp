#include "gfp/train.hpp"

#include <malloc.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gfp/config.hpp"
#include "gfp/manifest.hpp"
#include "gfp/parallel.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/rng.hpp"

namespace gfp {

namespace {

struct MicroBatch {
  std::size_t first = 0;  // offset into the epoch order
  std::size_t count = 0;
};

struct ShardState {
  ad::Graph graph;
  std::vector<ad::NodeId> leaves;  // one per parameter tensor, this episode
  double loss_sum = 0.0;           // sum of per-sample losses
};

double run_shard(ShardState& shard, const NetworkParams& net, const Config& cfg,
                 const std::vector<TrainSample>& samples, const std::vector<std::size_t>& order,
                 const MicroBatch& mb, bool training, std::uint64_t dropout_seed,
                 bool want_grads) {
  const int n = net.config.source_count;
  const int m = net.config.template_count;
  const auto bs = static_cast<Eigen::Index>(mb.count);

  ad::Mat src(bs * n, 3), tmpl(bs * m, 3);
  std::vector<ad::Mat> targets;
  targets.reserve(mb.count);
  for (std::size_t q = 0; q < mb.count; ++q) {
    const TrainSample& s = samples[order[mb.first + q]];
    src.middleRows(static_cast<Eigen::Index>(q) * n, n) = stack_points(s.source);
    tmpl.middleRows(static_cast<Eigen::Index>(q) * m, m) = stack_points(s.templ);
    targets.push_back(stack_points(s.label));
  }

  ad::Graph& g = shard.graph;
  g.clear();
  shard.leaves.clear();
  shard.leaves.reserve(net.params.tensors.size());
  for (const ad::ParamTensor& t : net.params.tensors) shard.leaves.push_back(g.leaf(t.value));

  Rng dropout_rng(dropout_seed);
  const ForwardNodes fwd = build_forward_with_leaves(g, net, shard.leaves, src, tmpl,
                                                     static_cast<int>(mb.count), training,
                                                     &dropout_rng);

  const ad::NodeId cd = g.chamfer_batch(fwd.modeled, n, targets, cfg.chamfer_squared);
  const ad::NodeId lap = g.laplacian_batch(fwd.modeled, n, cfg.laplacian_k);
  const ad::NodeId loss =
      g.add(g.scale(g.mean_all(cd), cfg.loss.alpha), g.scale(g.mean_all(lap), 1.0 - cfg.loss.alpha));

  const double loss_value = g.value(loss)(0, 0);
  shard.loss_sum = loss_value * static_cast<double>(mb.count);

  // Gradients stay inside the graph; the reduction reads them through
  // shard.leaves instead of copying the full parameter set per shard.
  if (want_grads) g.backward(loss);
  return loss_value;
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& samples, const NetworkConfig& net_cfg,
                  const Config& cfg) {
  if (samples.empty()) throw std::invalid_argument("empty dataset");
  net_cfg.validate();
  for (const TrainSample& s : samples) {
    if (s.source.size() != static_cast<std::size_t>(net_cfg.source_count) ||
        s.label.size() != static_cast<std::size_t>(net_cfg.source_count) ||
        s.templ.size() != static_cast<std::size_t>(net_cfg.template_count))
      throw std::invalid_argument("training sample sizes do not match the network config");
  }
  if (cfg.train_batch < 1 || cfg.train_microbatch < 1)
    throw std::invalid_argument("batch and microbatch sizes must be >= 1");

  // Deterministic validation split.
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Rng split_rng(derive_seed(cfg.seed, 0xA11CE));
  split_rng.shuffle(all);
  const std::size_t n_val =
      static_cast<std::size_t>(cfg.train_val_fraction * static_cast<double>(samples.size()));
  std::vector<std::size_t> val_idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  if (train_idx.empty()) throw std::invalid_argument("validation split leaves no training data");

  // Micro-batch graphs churn multi-megabyte buffers; keep them on the heap
  // instead of bouncing mmap regions (and their page faults) per batch.
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);

  Rng init_rng(derive_seed(cfg.seed, 0x1217));
  NetworkParams net = init_params(net_cfg, init_rng, true);
  ad::Adam opt(net.params, cfg.adam);

  TrainResult result;
  result.params = net;  // overwritten on first val improvement
  double best_val = std::numeric_limits<double>::infinity();

  const std::size_t mb_size = static_cast<std::size_t>(cfg.train_microbatch);
  std::vector<ShardState> shards;

  for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, 0xE90C0000ULL + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = train_idx;
    order_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    std::size_t batch_index = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.train_batch, ++batch_index) {
      const std::size_t batch_n = std::min<std::size_t>(cfg.train_batch, order.size() - start);

      std::vector<MicroBatch> mbs;
      for (std::size_t off = 0; off < batch_n; off += mb_size)
        mbs.push_back({start + off, std::min(mb_size, batch_n - off)});
      if (shards.size() < mbs.size()) shards.resize(mbs.size());

      parallel_for(mbs.size(), cfg.threads, [&](std::size_t s) {
        const std::uint64_t dseed =
            derive_seed(cfg.seed, 0xD0000000ULL + (static_cast<std::uint64_t>(epoch) << 32) +
                                      (static_cast<std::uint64_t>(batch_index) << 8) + s);
        run_shard(shards[s], net, cfg, samples, order, mbs[s], true, dseed, true);
      });

      // Fixed reduction order: shard 0, 1, 2, ... regardless of thread count.
      // Tensors reduce independently, so the tensor loop itself can fan out.
      const double inv_batch = 1.0 / static_cast<double>(batch_n);
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < mbs.size(); ++s) batch_loss += shards[s].loss_sum;
      const std::size_t n_shards = mbs.size();
      parallel_for(net.params.tensors.size(), cfg.threads, [&](std::size_t t) {
        ad::Mat& g = net.params.tensors[t].grad;
        g = shards[0].graph.grad(shards[0].leaves[t]);
        for (std::size_t s = 1; s < n_shards; ++s)
          g += shards[s].graph.grad(shards[s].leaves[t]);
        g *= inv_batch;
        net.params.tensors[t].has_grad = true;
      });
      epoch_loss_sum += batch_loss;

      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                 std::to_string(epoch + 1) + " batch " +
                                 std::to_string(batch_index + 1));
      opt.step(net.params, cfg.threads);
    }

    result.train_curve.push_back(epoch_loss_sum / static_cast<double>(order.size()));

    if (!val_idx.empty()) {
      std::vector<MicroBatch> mbs;
      for (std::size_t off = 0; off < val_idx.size(); off += mb_size)
        mbs.push_back({off, std::min(mb_size, val_idx.size() - off)});
      if (shards.size() < mbs.size()) shards.resize(mbs.size());
      parallel_for(mbs.size(), cfg.threads, [&](std::size_t s) {
        run_shard(shards[s], net, cfg, samples, val_idx, mbs[s], false, 0, false);
      });
      double val_sum = 0.0;
      for (std::size_t s = 0; s < mbs.size(); ++s) val_sum += shards[s].loss_sum;
      const double val_loss = val_sum / static_cast<double>(val_idx.size());
      result.val_curve.push_back(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        result.params = net;
        result.best_epoch = epoch + 1;
      }
    }

    opt.end_epoch();
  }

  if (val_idx.empty()) {
    result.params = net;
    result.best_epoch = cfg.train_epochs;
  }
  return result;
}

std::vector<TrainSample> load_train_samples(const DatasetManifest& manifest) {
  std::vector<TrainSample> samples;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != Split::kTrain) continue;
    if (e.label_path.empty())
      throw std::runtime_error("train entry " + e.sample_id + " has no label path");
    TrainSample s;
    s.source = read_ply(e.source_path);
    s.templ = read_ply(e.template_path);
    s.label = read_ply(e.label_path);
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_loss_curve(const TrainResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write loss curve: " + path);
  out << "epoch\ttrain_loss\tval_loss\n";
  for (std::size_t e = 0; e < result.train_curve.size(); ++e) {
    out << (e + 1) << '\t' << format_coord(result.train_curve[e]) << '\t';
    out << (e < result.val_curve.size() ? format_coord(result.val_curve[e]) : "-") << '\n';
  }
}

}  // namespace gfp
