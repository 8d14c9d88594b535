#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "breathscope/image.hpp"

namespace breathscope {

struct PinholeIntrinsics {
  double fx = 0.0;  // focal lengths, pixels
  double fy = 0.0;
  double cx = 0.0;  // principal point, pixels
  double cy = 0.0;
  double k1 = 0.0;  // radial distortion
  double k2 = 0.0;
};

/// Two-camera rig. Convention: a point X_l in the left camera frame maps to
/// the right camera frame as X_r = rotation * X_l + translation_mm. Camera
/// frames are z forward, x right, y down.
struct StereoRig {
  PinholeIntrinsics left;
  PinholeIntrinsics right;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_mm = Eigen::Vector3d::Zero();

  double baseline_mm() const { return translation_mm.norm(); }
};

/// Reads a rig from a `key = value` file with keys fx_l fy_l cx_l cy_l
/// (k1_l k2_l optional, default 0), the same with _r, `rot` (9 values
/// row-major) and `trans` (3 values, mm). The rotation is re-orthonormalized
/// when within 1e-6 of orthonormal and rejected otherwise.
StereoRig load_calibration(const std::filesystem::path& path);

/// Enforces rig invariants (orthonormal right-handed rotation, positive
/// baseline); returns the cleaned-up rig.
StereoRig validate_rig(const StereoRig& rig);

/// Inverse sample map: for each rectified pixel, where to sample the source
/// image. Out-of-frustum pixels carry negative coordinates.
struct CameraMap {
  int width = 0;
  int height = 0;
  std::vector<float> src_x;
  std::vector<float> src_y;
};

struct RectificationMaps {
  CameraMap left;
  CameraMap right;
  double rectified_f = 0.0;   // shared focal length, pixels
  double rectified_cx = 0.0;  // shared principal point
  double rectified_cy = 0.0;
  double rectified_baseline_mm = 0.0;
  // Rotations from each original camera frame to the common rectified frame.
  Eigen::Matrix3d rect_rotation_left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rect_rotation_right = Eigen::Matrix3d::Identity();
};

/// Builds row-aligning rectification maps: the relative rotation is split
/// evenly between the cameras, then both are rotated so the x axis lies along
/// the baseline. Both rectified cameras share rectified_f / rectified_c.
RectificationMaps compute_rectification(const StereoRig& rig, int width,
                                        int height);

/// Resamples through an inverse map with bilinear interpolation;
/// out-of-bounds samples produce intensity 0.
GrayImage rectify_image(const GrayImage& img, const CameraMap& map);

/// Z = rectified_f * baseline / d. Throws for d <= 0.
double disparity_to_depth(double disparity_px, double rectified_f_px,
                          double baseline_mm);

/// Projects a 3D point (left-camera frame, mm) through the rectified left
/// camera. Used by tests and by the synthetic renderer's geometry checks.
Eigen::Vector2d project_rectified_left(const RectificationMaps& maps,
                                       const Eigen::Vector3d& point_mm);
/// Same through the rectified right camera.
Eigen::Vector2d project_rectified_right(const RectificationMaps& maps,
                                        const Eigen::Vector3d& point_mm);

}  // namespace breathscope
