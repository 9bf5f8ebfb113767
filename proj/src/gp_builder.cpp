#include "gfp/gp_builder.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gfp/config.hpp"
#include "gfp/kdtree.hpp"
#include "gfp/normals.hpp"
#include "gfp/ply_io.hpp"
#include "gfp/registration.hpp"

namespace gfp {

namespace {

// Centers the cloud and scales it to unit bounding diagonal.
void normalize_frame(PointCloud& cloud) {
  const Vec3 c = centroid(cloud);
  for (Vec3& p : cloud.points) p -= c;
  const double diag = bounding_diagonal(cloud);
  if (diag > 0.0)
    for (Vec3& p : cloud.points) p /= diag;
}

PointCloud concat(const std::vector<PointCloud>& clouds) {
  PointCloud out;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.size();
  out.points.reserve(total);
  for (const auto& c : clouds)
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  return out;
}

}  // namespace

GpaResult procrustes_align(const std::vector<PointCloud>& shapes, int max_rounds, double tol) {
  if (shapes.size() < 2) throw std::invalid_argument("need >= 2 shapes");
  for (const auto& s : shapes)
    if (s.size() < 10) throw std::invalid_argument("each shape needs >= 10 points");

  GpaResult result;
  result.aligned.reserve(shapes.size());
  for (const auto& s : shapes) {
    PointCloud a;
    a.points = s.points;  // normals dropped; the GP re-estimates them
    normalize_frame(a);
    result.aligned.push_back(std::move(a));
  }
  result.mean = concat(result.aligned);
  normalize_frame(result.mean);

  for (int round = 0; round < max_rounds; ++round) {
    for (std::size_t k = 0; k < result.aligned.size(); ++k) {
      // Align shape k against the union of the other shapes: matching against
      // a union that contains the shape's own points would pin it in place.
      PointCloud others;
      for (std::size_t j = 0; j < result.aligned.size(); ++j)
        if (j != k)
          others.points.insert(others.points.end(), result.aligned[j].points.begin(),
                               result.aligned[j].points.end());
      const SpatialIndex others_index(others);

      PointCloud& shape = result.aligned[k];
      std::vector<Vec3> src, dst;
      src.reserve(shape.size());
      dst.reserve(shape.size());
      for (const Vec3& p : shape.points) {
        src.push_back(p);
        dst.push_back(others.points[others_index.nearest(p).first]);
      }
      const RigidTransform t = umeyama_fit(src, dst);
      for (Vec3& p : shape.points) p = t.apply(p);
    }

    PointCloud new_mean = concat(result.aligned);
    const Vec3 c = centroid(new_mean);
    const double diag = bounding_diagonal(new_mean);
    for (auto& shape : result.aligned)
      for (Vec3& p : shape.points) p = (p - c) / diag;
    for (Vec3& p : new_mean.points) p = (p - c) / diag;

    double movement = 0.0;
    for (std::size_t i = 0; i < new_mean.size(); ++i)
      movement += (new_mean.points[i] - result.mean.points[i]).norm();
    movement /= static_cast<double>(new_mean.size());

    result.mean = std::move(new_mean);
    result.rounds = round + 1;
    if (movement < tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

MlsResult mls_smooth(const PointCloud& cloud, double radius, int poly_order) {
  if (!(radius > 0.0)) throw std::invalid_argument("non-positive radius");
  if (poly_order != 1 && poly_order != 2)
    throw std::invalid_argument("mls poly order must be 1 or 2");
  if (cloud.empty()) throw std::invalid_argument("empty cloud");

  const SpatialIndex index(cloud);
  const double sigma = radius / 2.0;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const int n_terms = poly_order == 1 ? 3 : 6;

  MlsResult out;
  out.cloud.points.resize(cloud.size());
  out.passthrough.assign(cloud.size(), 0);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto nbrs = index.radius_search(p, radius);
    if (nbrs.size() < 6) {
      out.cloud.points[i] = p;
      out.passthrough[i] = 1;
      continue;
    }

    std::vector<double> w(nbrs.size());
    double w_sum = 0.0;
    Vec3 c = Vec3::Zero();
    for (std::size_t q = 0; q < nbrs.size(); ++q) {
      const Vec3& pj = cloud.points[nbrs[q]];
      w[q] = std::exp(-(pj - p).squaredNorm() * inv_two_sigma2);
      w_sum += w[q];
      c += w[q] * pj;
    }
    c /= w_sum;

    Mat3 cov = Mat3::Zero();
    for (std::size_t q = 0; q < nbrs.size(); ++q) {
      const Vec3 d = cloud.points[nbrs[q]] - c;
      cov += w[q] * (d * d.transpose());
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 n = eig.eigenvectors().col(0);
    const Vec3 u = eig.eigenvectors().col(2);
    const Vec3 v = eig.eigenvectors().col(1);

    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(n_terms, n_terms);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(n_terms);
    Eigen::VectorXd basis(n_terms);
    for (std::size_t q = 0; q < nbrs.size(); ++q) {
      const Vec3 d = cloud.points[nbrs[q]] - c;
      const double a = d.dot(u), b = d.dot(v), h = d.dot(n);
      basis(0) = 1.0;
      basis(1) = a;
      basis(2) = b;
      if (poly_order == 2) {
        basis(3) = a * a;
        basis(4) = a * b;
        basis(5) = b * b;
      }
      ata.noalias() += w[q] * basis * basis.transpose();
      atb.noalias() += w[q] * h * basis;
    }
    const Eigen::VectorXd coeff = ata.ldlt().solve(atb);

    const Vec3 dp = p - c;
    const double ap = dp.dot(u), bp = dp.dot(v);
    basis(0) = 1.0;
    basis(1) = ap;
    basis(2) = bp;
    if (poly_order == 2) {
      basis(3) = ap * ap;
      basis(4) = ap * bp;
      basis(5) = bp * bp;
    }
    const double height = coeff.dot(basis);
    const Vec3 projected = c + ap * u + bp * v + height * n;

    if (!projected.allFinite() || (projected - p).norm() > 2.0 * radius) {
      out.cloud.points[i] = p;
      out.passthrough[i] = 1;
    } else {
      out.cloud.points[i] = projected;
    }
  }
  return out;
}

namespace {

std::size_t count_voxels(const PointCloud& cloud, const Vec3& lo, double edge) {
  std::map<std::tuple<long, long, long>, bool> seen;
  for (const Vec3& p : cloud.points) {
    const Vec3 rel = (p - lo) / edge;
    seen[{static_cast<long>(std::floor(rel.x())), static_cast<long>(std::floor(rel.y())),
          static_cast<long>(std::floor(rel.z()))}] = true;
  }
  return seen.size();
}

}  // namespace

ResampleResult resample(const PointCloud& cloud, std::size_t target_count) {
  if (target_count < 4) throw std::invalid_argument("resample target must be >= 4");
  ResampleResult out;
  if (target_count >= cloud.size()) {
    out.cloud = cloud;
    out.unchanged = true;
    return out;
  }

  Vec3 lo = cloud.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();

  const auto lo_band = static_cast<std::size_t>(std::floor(0.98 * static_cast<double>(target_count)));
  const auto hi_band = static_cast<std::size_t>(std::ceil(1.02 * static_cast<double>(target_count)));

  double edge_lo = diag * 1e-4;  // fine grid: about one point per voxel
  double edge_hi = diag;         // single voxel
  double best_edge = edge_lo;
  std::size_t best_count = cloud.size();

  for (int it = 0; it < 60; ++it) {
    const double edge = 0.5 * (edge_lo + edge_hi);
    const std::size_t count = count_voxels(cloud, lo, edge);
    const auto gap = [&](std::size_t c) {
      return c > target_count ? c - target_count : target_count - c;
    };
    if (gap(count) < gap(best_count)) {
      best_count = count;
      best_edge = edge;
    }
    if (count >= lo_band && count <= hi_band) {
      best_count = count;
      best_edge = edge;
      break;
    }
    if (count > target_count)
      edge_lo = edge;  // voxels too small, coarsen
    else
      edge_hi = edge;
  }

  std::map<std::tuple<long, long, long>, std::vector<std::size_t>> voxels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 rel = (cloud.points[i] - lo) / best_edge;
    voxels[{static_cast<long>(std::floor(rel.x())), static_cast<long>(std::floor(rel.y())),
            static_cast<long>(std::floor(rel.z()))}]
        .push_back(i);
  }

  out.cloud.points.reserve(voxels.size());
  for (const auto& [key, members] : voxels) {
    Vec3 c = Vec3::Zero();
    for (std::size_t i : members) c += cloud.points[i];
    c /= static_cast<double>(members.size());
    std::size_t rep = members.front();
    double best_d2 = (cloud.points[rep] - c).squaredNorm();
    for (std::size_t i : members) {
      const double d2 = (cloud.points[i] - c).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        rep = i;
      }
    }
    out.cloud.points.push_back(cloud.points[rep]);
  }
  return out;
}

namespace {

// Rotates the cloud into its PCA frame with deterministic axis signs so that
// a rigidly pre-transformed input family yields the same GP.
void canonicalize_orientation(PointCloud& cloud) {
  const Vec3 c = centroid(cloud);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : cloud.points) {
    const Vec3 d = p - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Descending eigenvalues: principal axis first.
  Vec3 e0 = eig.eigenvectors().col(2);
  Vec3 e1 = eig.eigenvectors().col(1);

  auto fix_sign = [&](Vec3& e) {
    double skew = 0.0;
    for (const Vec3& p : cloud.points) {
      const double t = e.dot(p - c);
      skew += t * t * t;
    }
    if (std::abs(skew) > 1e-9) {
      if (skew < 0.0) e = -e;
      return;
    }
    // Symmetric along this axis: orient toward the farthest point.
    double best = 0.0;
    for (const Vec3& p : cloud.points) {
      const double t = e.dot(p - c);
      if (std::abs(t) > std::abs(best)) best = t;
    }
    if (best < 0.0) e = -e;
  };
  fix_sign(e0);
  fix_sign(e1);
  const Vec3 e2 = e0.cross(e1);

  Mat3 rot;
  rot.row(0) = e0.transpose();
  rot.row(1) = e1.transpose();
  rot.row(2) = e2.transpose();
  for (Vec3& p : cloud.points) p = rot * (p - c);
}

}  // namespace

GenericPrimitive build_gp(const std::string& class_name, const std::vector<PointCloud>& shapes,
                          const Config& cfg) {
  GpaResult gpa = procrustes_align(shapes, cfg.gpa_max_rounds, cfg.gpa_tol);

  // Rotate into the canonical PCA frame before any grid-based processing:
  // the voxel resampler is axis-aligned, so running it earlier would make
  // the GP depend on the input orientation.
  canonicalize_orientation(gpa.mean);
  normalize_frame(gpa.mean);

  const MlsResult smoothed = mls_smooth(gpa.mean, cfg.gp_mls_radius, cfg.gp_mls_order);
  ResampleResult sampled = resample(smoothed.cloud, static_cast<std::size_t>(cfg.gp_target_points));
  normalize_frame(sampled.cloud);

  NormalsEstimate withn = estimate_normals(sampled.cloud, cfg.normals_k);
  // Center exactly: normal estimation does not move points, but the frame
  // normalization above already centered; subtract any residual drift.
  const Vec3 c = centroid(withn.cloud);
  for (Vec3& p : withn.cloud.points) p -= c;

  GenericPrimitive gp;
  gp.class_name = class_name;
  gp.cloud = std::move(withn.cloud);
  gp.source_count = static_cast<int>(shapes.size());
  gp.target_point_count = gp.cloud.size();
  return gp;
}

void save_gp(const GenericPrimitive& gp, const std::string& ply_path,
             const std::string& meta_path, std::uint64_t config_hash) {
  write_ply(gp.cloud, ply_path);
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw std::runtime_error("cannot write gp metadata: " + meta_path);
  meta << "class_name: " << gp.class_name << '\n';
  meta << "source_count: " << gp.source_count << '\n';
  meta << "target_point_count: " << gp.target_point_count << '\n';
  meta << "config_hash: " << config_hash << '\n';
}

GenericPrimitive load_gp(const std::string& ply_path, const std::string& meta_path) {
  GenericPrimitive gp;
  gp.cloud = read_ply(ply_path);
  std::ifstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot open gp metadata: " + meta_path);
  std::string line;
  while (std::getline(meta, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    if (key == "class_name") gp.class_name = value;
    else if (key == "source_count") gp.source_count = std::stoi(value);
    else if (key == "target_point_count") gp.target_point_count = std::stoul(value);
  }
  return gp;
}

}  // namespace gfp
