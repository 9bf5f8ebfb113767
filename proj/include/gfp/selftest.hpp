#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gfp/network.hpp"
#include "gfp/point_cloud.hpp"

namespace gfp {

/// Brute-force reference paths, deliberately independent of the k-d tree:
/// plain O(n) / O(n^2) scans with the same (distance, index) tie rule.
namespace brute {
std::pair<std::size_t, double> nearest(const PointCloud& cloud, const Vec3& query);
std::vector<std::size_t> radius_search(const PointCloud& cloud, const Vec3& center,
                                       double radius);
double chamfer(const PointCloud& a, const PointCloud& b, bool squared = false);
double fidelity(const PointCloud& completed, const PointCloud& ground_truth);
double laplacian_residual(const PointCloud& cloud, int k);
}  // namespace brute

/// Central finite-difference check of d(total_loss)/d(params) through the
/// network forward pass. Returns the maximum relative error over all
/// parameters, with rel_err = |a - n| / max(1, |a|, |n|).
double gradient_check(const NetworkConfig& cfg, std::uint64_t seed, double h = 1e-4,
                      double alpha = 0.7, int laplacian_k = 6);

struct SelftestSuite {
  std::string name;
  int checks = 0;
  int failures = 0;
};

/// Oracle-equivalence, gradient and symmetry suites behind the `selftest`
/// CLI command. Prints one line per suite to stdout.
std::vector<SelftestSuite> run_selftest(std::uint64_t seed);

}  // namespace gfp
