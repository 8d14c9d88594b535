#include "breathscope/icp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "breathscope/error.hpp"

namespace breathscope {

double rotation_angle_deg(const Eigen::Matrix3d& rotation) {
  double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

RigidTransform kabsch(std::span<const Eigen::Vector3d> src,
                      std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size())
    fail(ErrorKind::parameter, "kabsch: point lists differ in length");
  if (src.size() < 3)
    fail(ErrorKind::degeneracy, "kabsch: need at least 3 point pairs");

  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= static_cast<double>(src.size());
  dst_mean /= static_cast<double>(dst.size());

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i)
    cross += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  // Rank < 2 leaves the rotation ambiguous (collinear or coincident sets).
  if (sv(1) <= 1e-12 * std::max(sv(0), 1.0))
    fail(ErrorKind::degeneracy, "kabsch: degenerate point configuration");

  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d diag(1.0, 1.0, (v * u.transpose()).determinant());
  RigidTransform t;
  t.rotation = v * diag.asDiagonal() * u.transpose();
  t.translation_mm = dst_mean - t.rotation * src_mean;
  return t;
}

IcpResult icp_align(const PointCloud& source, const PointCloud& reference,
                    const IcpParams& params) {
  NeighborIndex index(reference.points);
  return icp_align(source, index, params);
}

IcpResult icp_align(const PointCloud& source, const NeighborIndex& reference,
                    const IcpParams& params) {
  if (params.max_iterations < 1 || params.rmse_tol_mm <= 0.0)
    fail(ErrorKind::parameter, "icp: bad iteration/tolerance parameters");
  const std::size_t n = source.size();
  if (n < static_cast<std::size_t>(params.min_correspondences) ||
      reference.size() < static_cast<std::size_t>(params.min_correspondences))
    fail(ErrorKind::alignment, "icp: clouds smaller than min_correspondences");

  IcpResult result;
  std::vector<Eigen::Vector3d> moved(n);
  std::vector<Eigen::Vector3d> matched(n);
  std::vector<double> dists(n);
  std::vector<Eigen::Vector3d> acc_src, acc_dst;
  acc_src.reserve(n);
  acc_dst.reserve(n);

  double prev_rmse = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    // 1. correspondences under the current transform
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      moved[i] = result.transform.apply(source.points[i]);
      NeighborIndex::Hit hit = reference.nearest(moved[i]);
      matched[i] = reference.point(hit.index);
      dists[i] = std::sqrt(hit.dist_sq);
      sq_sum += hit.dist_sq;
    }
    double rmse = std::sqrt(sq_sum / n);
    result.rmse_history.push_back(rmse);
    result.rmse_mm = rmse;
    result.iterations = iter + 1;
    if (std::abs(prev_rmse - rmse) < params.rmse_tol_mm) {
      result.converged = true;
      break;
    }
    prev_rmse = rmse;

    // 2. optional rejection of far pairs (multiple of the median distance)
    acc_src.clear();
    acc_dst.clear();
    if (params.reject_mult > 0.0) {
      std::vector<double> sorted = dists;
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                       sorted.end());
      double median = sorted[sorted.size() / 2];
      double cutoff = params.reject_mult * median;
      for (std::size_t i = 0; i < n; ++i) {
        if (dists[i] <= cutoff) {
          acc_src.push_back(moved[i]);
          acc_dst.push_back(matched[i]);
        }
      }
    } else {
      acc_src.assign(moved.begin(), moved.end());
      acc_dst.assign(matched.begin(), matched.end());
    }
    if (acc_src.size() < static_cast<std::size_t>(params.min_correspondences))
      fail(ErrorKind::alignment,
           "icp: too few correspondences after rejection");

    // 3. rigid update on the accepted pairs, composed onto the running
    //    transform
    RigidTransform delta = kabsch(acc_src, acc_dst);
    result.transform = result.transform.followed_by(delta);
  }
  return result;
}

}  // namespace breathscope
