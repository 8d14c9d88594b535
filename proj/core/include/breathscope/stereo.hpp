#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "breathscope/image.hpp"

namespace breathscope {

/// Per-pixel horizontal match offset in pixels; NaN marks invalid pixels.
struct DisparityMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  static DisparityMap invalid_map(int width, int height) {
    DisparityMap m;
    m.width = width;
    m.height = height;
    m.values.assign(static_cast<std::size_t>(width) * height,
                    std::numeric_limits<float>::quiet_NaN());
    return m;
  }

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool valid(int x, int y) const { return std::isfinite(at(x, y)); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (float v : values)
      if (std::isfinite(v)) ++n;
    return n;
  }
};

struct MatchParams {
  int min_disparity = 0;
  int max_disparity = 64;
  int block_radius = 5;               // window = (2r+1)^2
  double uniqueness_ratio = 1.05;     // best*ratio must beat second best
  double lr_consistency_tol_px = 1.0; // negative disables the check
  double texture_threshold = 10.0;    // minimum window intensity variance
};

/// Integer SAD block matching. Output values are whole numbers; a pixel is
/// invalid when the window leaves the image at every candidate disparity,
/// the uniqueness test fails, the window variance is below the texture
/// threshold, or the left-right check disagrees.
DisparityMap block_match_integer(const GrayImage& left, const GrayImage& right,
                                 const MatchParams& params);

/// Integer block matching followed by 3-point parabola subpixel refinement.
DisparityMap compute_disparity(const GrayImage& left, const GrayImage& right,
                               const MatchParams& params);

/// Median filter over valid neighbors, then speckle removal: 4-connected
/// components of similar disparity (|delta| <= speckle_tol) smaller than
/// speckle_max_area are invalidated. median_radius 0 or speckle_max_area 0
/// skip the respective stage. Never converts an invalid pixel to valid.
DisparityMap filter_disparity(const DisparityMap& map, int median_radius,
                              int speckle_max_area, double speckle_tol);

/// Debug dump: 16-bit PGM, value = disparity * 256 rounded, invalid = 0.
void write_disparity_pgm16(const DisparityMap& map,
                           const std::filesystem::path& path);

}  // namespace breathscope
