#pragma once

#include <Eigen/Core>
#include <array>
#include <limits>
#include <vector>

#include "breathscope/calib.hpp"
#include "breathscope/stereo.hpp"

namespace breathscope {

/// 3D surface points in millimetres, left-rectified-camera frame
/// (z forward, x right, y down). source_pixels, when kept, records the
/// rectified pixel each point came from.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::array<int, 2>> source_pixels;  // empty or points.size()

  std::size_t size() const { return points.size(); }
  bool has_pixels() const { return source_pixels.size() == points.size(); }
};

/// Axis-aligned crop box in camera-frame millimetres, or "full".
struct RoiBox {
  bool full = true;
  Eigen::Vector3d min_mm = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_mm = Eigen::Vector3d::Zero();

  static RoiBox full_box() { return RoiBox{}; }
  static RoiBox box(const Eigen::Vector3d& min_mm, const Eigen::Vector3d& max_mm);

  bool contains(const Eigen::Vector3d& p) const {
    if (full) return true;
    return p.x() >= min_mm.x() && p.x() <= max_mm.x() && p.y() >= min_mm.y() &&
           p.y() <= max_mm.y() && p.z() >= min_mm.z() && p.z() <= max_mm.z();
  }
};

/// Balanced k-d tree over 3D points; queries return exact nearest neighbors.
class NeighborIndex {
 public:
  struct Hit {
    int index = -1;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  explicit NeighborIndex(std::vector<Eigen::Vector3d> points);

  Hit nearest(const Eigen::Vector3d& query) const;
  /// k nearest hits sorted by ascending distance (fewer if the cloud is
  /// smaller than k).
  std::vector<Hit> knn(const Eigen::Vector3d& query, int k) const;

  std::size_t size() const { return points_.size(); }
  const Eigen::Vector3d& point(int index) const { return points_[index]; }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
  };

  int build(int begin, int end);
  template <typename Visit>
  void search(int node, const Eigen::Vector3d& q, double& worst,
              Visit&& visit) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Triangulates every valid disparity pixel:
/// Z = f*B/d, X = (u-cx)*Z/f, Y = (v-cy)*Z/f. Non-positive disparities are
/// skipped along with invalid pixels.
PointCloud reproject(const DisparityMap& map, const RectificationMaps& rect);

/// Keeps finite points with z inside [z_min_mm, z_max_mm].
PointCloud remove_invalid(const PointCloud& cloud, double z_min_mm = 300.0,
                          double z_max_mm = 2000.0);

struct DenoiseResult {
  PointCloud cloud;
  bool too_few_points = false;  // input had <= k points and passed through
};

/// Statistical outlier removal: points whose mean distance to their k nearest
/// neighbors exceeds mean + stddev_mult * stddev (over the whole cloud) are
/// dropped.
DenoiseResult denoise_statistical(const PointCloud& cloud, int k = 16,
                                  double stddev_mult = 1.5);

PointCloud crop_roi(const PointCloud& cloud, const RoiBox& roi);

/// Deterministic decimation: keeps ceil(size/stride) points at a fixed
/// stride so the result never exceeds max_points.
PointCloud subsample_stride(const PointCloud& cloud, std::size_t max_points);

}  // namespace breathscope
