#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "breathscope/cloud.hpp"

namespace breathscope {

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_mm = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation_mm;
  }
  /// Composition: (next.then-of-this)(p) = next(this(p)).
  RigidTransform followed_by(const RigidTransform& next) const {
    RigidTransform out;
    out.rotation = next.rotation * rotation;
    out.translation_mm = next.rotation * translation_mm + next.translation_mm;
    return out;
  }
  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation_mm = -(out.rotation * translation_mm);
    return out;
  }
  static RigidTransform identity() { return RigidTransform{}; }
};

/// Rotation angle of a transform in degrees; used to compare recovered and
/// ground-truth transforms.
double rotation_angle_deg(const Eigen::Matrix3d& rotation);

/// Least-squares rigid fit R*src + t ~= dst: center both sets, form the 3x3
/// cross-covariance, take its SVD U*S*V^T and set
/// R = V * diag(1, 1, det(V*U^T)) * U^T, t = dst_mean - R * src_mean.
/// Fewer than 3 points or a rank-deficient covariance raise a degeneracy
/// error.
RigidTransform kabsch(std::span<const Eigen::Vector3d> src,
                      std::span<const Eigen::Vector3d> dst);

struct IcpParams {
  int max_iterations = 50;
  double rmse_tol_mm = 1e-4;     // stop when |delta RMSE| falls below this
  double reject_mult = 3.0;      // drop pairs beyond mult * median distance;
                                 // 0 disables rejection
  int min_correspondences = 100;
};

struct IcpResult {
  RigidTransform transform;  // maps original source coords into the reference
  double rmse_mm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rmse_history;  // RMSE per iteration, full pair set
};

/// Point-to-point ICP: nearest-neighbor correspondence against the reference,
/// optional median-based pair rejection, least-squares rigid update, repeated
/// until the RMSE change drops below tolerance or iterations run out.
IcpResult icp_align(const PointCloud& source, const PointCloud& reference,
                    const IcpParams& params = {});

/// Same, against a prebuilt reference index (shared across frames).
IcpResult icp_align(const PointCloud& source, const NeighborIndex& reference,
                    const IcpParams& params = {});

}  // namespace breathscope
