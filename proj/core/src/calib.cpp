#include "breathscope/calib.hpp"

#include <cmath>

#include "breathscope/error.hpp"
#include "breathscope/keyvalue.hpp"

namespace breathscope {

namespace {

PinholeIntrinsics read_intrinsics(const KeyValueFile& kv,
                                  const std::string& suffix) {
  PinholeIntrinsics k;
  k.fx = kv.require_double("fx" + suffix);
  k.fy = kv.require_double("fy" + suffix);
  k.cx = kv.require_double("cx" + suffix);
  k.cy = kv.require_double("cy" + suffix);
  k.k1 = kv.get_double("k1" + suffix, 0.0);
  k.k2 = kv.get_double("k2" + suffix, 0.0);
  if (k.fx <= 0.0 || k.fy <= 0.0)
    fail(ErrorKind::validation,
         "focal lengths must be positive (fx" + suffix + ", fy" + suffix + ")");
  return k;
}

// Applies radial distortion to normalized coordinates.
inline void distort(const PinholeIntrinsics& k, double xn, double yn,
                    double& xd, double& yd) {
  double r2 = xn * xn + yn * yn;
  double s = 1.0 + r2 * (k.k1 + r2 * k.k2);
  xd = xn * s;
  yd = yn * s;
}

CameraMap build_map(const PinholeIntrinsics& cam, const Eigen::Matrix3d& rect_r,
                    double f, double cx, double cy, int width, int height) {
  CameraMap map;
  map.width = width;
  map.height = height;
  map.src_x.resize(static_cast<std::size_t>(width) * height);
  map.src_y.resize(static_cast<std::size_t>(width) * height);
  Eigen::Matrix3d to_old = rect_r.transpose();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      Eigen::Vector3d dir((u - cx) / f, (v - cy) / f, 1.0);
      Eigen::Vector3d old_dir = to_old * dir;
      std::size_t idx = static_cast<std::size_t>(v) * width + u;
      if (old_dir.z() <= 1e-9) {
        // behind the original camera: nothing to sample
        map.src_x[idx] = -1.0f;
        map.src_y[idx] = -1.0f;
        continue;
      }
      double xn = old_dir.x() / old_dir.z();
      double yn = old_dir.y() / old_dir.z();
      double xd, yd;
      distort(cam, xn, yn, xd, yd);
      map.src_x[idx] = static_cast<float>(cam.fx * xd + cam.cx);
      map.src_y[idx] = static_cast<float>(cam.fy * yd + cam.cy);
    }
  }
  return map;
}

}  // namespace

StereoRig load_calibration(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::io, "calibration file not found: " + path.string());
  KeyValueFile kv = KeyValueFile::parse_file(path);
  StereoRig rig;
  rig.left = read_intrinsics(kv, "_l");
  rig.right = read_intrinsics(kv, "_r");
  std::vector<double> r = kv.require_doubles("rot", 9);
  std::vector<double> t = kv.require_doubles("trans", 3);
  rig.rotation << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  rig.translation_mm = Eigen::Vector3d(t[0], t[1], t[2]);
  return validate_rig(rig);
}

StereoRig validate_rig(const StereoRig& rig) {
  StereoRig out = rig;
  const Eigen::Matrix3d& r = rig.rotation;
  double drift = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
  if (drift > 1e-6)
    fail(ErrorKind::validation,
         "rotation is not orthonormal (drift " + std::to_string(drift) + ")");
  if (drift > 1e-12) {
    // Snap back to the nearest rotation.
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.rotation = svd.matrixU() * svd.matrixV().transpose();
  }
  if (out.rotation.determinant() < 0.0)
    fail(ErrorKind::validation, "rotation has determinant -1 (reflection)");
  if (out.baseline_mm() <= 0.0)
    fail(ErrorKind::validation, "baseline must be positive");
  return out;
}

RectificationMaps compute_rectification(const StereoRig& rig, int width,
                                        int height) {
  if (width < 1 || height < 1)
    fail(ErrorKind::parameter, "rectification image size must be positive");
  if (rig.baseline_mm() < 1e-9)
    fail(ErrorKind::geometry, "degenerate rig: baseline is zero");

  // Split the relative rotation evenly: left gets exp(+om/2), right
  // exp(-om/2), which zeroes the relative rotation between the new frames.
  Eigen::AngleAxisd om(rig.rotation);
  Eigen::Matrix3d half_l =
      Eigen::AngleAxisd(om.angle() / 2.0, om.axis()).toRotationMatrix();
  Eigen::Matrix3d half_r =
      Eigen::AngleAxisd(-om.angle() / 2.0, om.axis()).toRotationMatrix();

  // Align the x axis with the baseline so epipolar translation is purely
  // horizontal: S * (half_r * T) must equal (-b, 0, 0).
  Eigen::Vector3d t_mid = half_r * rig.translation_mm;
  Eigen::Vector3d ex = -t_mid.normalized();
  Eigen::Vector3d ez_old(0.0, 0.0, 1.0);
  Eigen::Vector3d ey = ez_old.cross(ex);
  double ey_norm = ey.norm();
  if (ey_norm < 1e-9)
    fail(ErrorKind::geometry,
         "degenerate rig: baseline parallel to the optical axis");
  ey /= ey_norm;
  Eigen::Vector3d ez = ex.cross(ey);
  Eigen::Matrix3d s;
  s.row(0) = ex;
  s.row(1) = ey;
  s.row(2) = ez;

  RectificationMaps maps;
  maps.rect_rotation_left = s * half_l;
  maps.rect_rotation_right = s * half_r;
  maps.rectified_baseline_mm = rig.baseline_mm();
  maps.rectified_f =
      0.25 * (rig.left.fx + rig.left.fy + rig.right.fx + rig.right.fy);

  // Shared principal point: keep each camera's old principal ray where it
  // used to land, averaged over the two cameras. An already-rectified rig
  // with equal intrinsics therefore reproduces its own maps exactly.
  auto principal_shift = [&](const Eigen::Matrix3d& rect_r) {
    Eigen::Vector3d d = rect_r * Eigen::Vector3d(0.0, 0.0, 1.0);
    return Eigen::Vector2d(maps.rectified_f * d.x() / d.z(),
                           maps.rectified_f * d.y() / d.z());
  };
  Eigen::Vector2d shift_l = principal_shift(maps.rect_rotation_left);
  Eigen::Vector2d shift_r = principal_shift(maps.rect_rotation_right);
  maps.rectified_cx =
      0.5 * (rig.left.cx - shift_l.x() + rig.right.cx - shift_r.x());
  maps.rectified_cy =
      0.5 * (rig.left.cy - shift_l.y() + rig.right.cy - shift_r.y());

  maps.left = build_map(rig.left, maps.rect_rotation_left, maps.rectified_f,
                        maps.rectified_cx, maps.rectified_cy, width, height);
  maps.right = build_map(rig.right, maps.rect_rotation_right, maps.rectified_f,
                         maps.rectified_cx, maps.rectified_cy, width, height);
  return maps;
}

GrayImage rectify_image(const GrayImage& img, const CameraMap& map) {
  if (img.width != map.width || img.height != map.height)
    fail(ErrorKind::parameter, "rectification map size does not match image");
  GrayImage out = GrayImage::filled(img.width, img.height, 0);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      std::size_t idx = static_cast<std::size_t>(v) * img.width + u;
      float sx = map.src_x[idx];
      float sy = map.src_y[idx];
      if (!(sx >= 0.0f) || !(sy >= 0.0f) || sx > img.width - 1 ||
          sy > img.height - 1)
        continue;  // out of bounds -> 0
      int x0 = static_cast<int>(sx);
      int y0 = static_cast<int>(sy);
      int x1 = std::min(x0 + 1, img.width - 1);
      int y1 = std::min(y0 + 1, img.height - 1);
      double fx = sx - x0;
      double fy = sy - y0;
      double v00 = img.at(x0, y0), v10 = img.at(x1, y0);
      double v01 = img.at(x0, y1), v11 = img.at(x1, y1);
      double val = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                   fy * ((1.0 - fx) * v01 + fx * v11);
      out.data[idx] = static_cast<std::uint8_t>(std::lround(val));
    }
  }
  return out;
}

double disparity_to_depth(double disparity_px, double rectified_f_px,
                          double baseline_mm) {
  if (disparity_px <= 0.0)
    fail(ErrorKind::invalid_disparity,
         "disparity must be positive, got " + std::to_string(disparity_px));
  return rectified_f_px * baseline_mm / disparity_px;
}

namespace {

Eigen::Vector2d project_through(const Eigen::Matrix3d& rect_r,
                                const Eigen::Vector3d& p, double f, double cx,
                                double cy) {
  Eigen::Vector3d q = rect_r * p;
  if (q.z() <= 0.0)
    fail(ErrorKind::geometry, "point is behind the rectified camera");
  return Eigen::Vector2d(f * q.x() / q.z() + cx, f * q.y() / q.z() + cy);
}

}  // namespace

Eigen::Vector2d project_rectified_left(const RectificationMaps& maps,
                                       const Eigen::Vector3d& point_mm) {
  return project_through(maps.rect_rotation_left, point_mm, maps.rectified_f,
                         maps.rectified_cx, maps.rectified_cy);
}

Eigen::Vector2d project_rectified_right(const RectificationMaps& maps,
                                        const Eigen::Vector3d& point_mm) {
  // The rectified right camera sits at baseline along +x of the rectified
  // left frame; equivalently apply the rig transform then the right
  // rectifying rotation. Using the left-frame shortcut keeps it exact:
  Eigen::Vector3d p_rect =
      maps.rect_rotation_left * point_mm -
      Eigen::Vector3d(maps.rectified_baseline_mm, 0.0, 0.0);
  if (p_rect.z() <= 0.0)
    fail(ErrorKind::geometry, "point is behind the rectified camera");
  return Eigen::Vector2d(
      maps.rectified_f * p_rect.x() / p_rect.z() + maps.rectified_cx,
      maps.rectified_f * p_rect.y() / p_rect.z() + maps.rectified_cy);
}

}  // namespace breathscope
