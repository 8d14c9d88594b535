#pragma once

#include <cstdint>
#include <vector>

#include "breathscope/error.hpp"

namespace breathscope {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static GrayImage filled(int width, int height, std::uint8_t value = 0) {
    if (width < 1 || height < 1)
      fail(ErrorKind::parameter, "image dimensions must be at least 1x1");
    GrayImage img;
    img.width = width;
    img.height = height;
    img.data.assign(static_cast<std::size_t>(width) * height, value);
    return img;
  }

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool same_size(const GrayImage& other) const {
    return width == other.width && height == other.height;
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

/// One stereo observation: two views of the scene at the same instant.
struct StereoFrame {
  GrayImage left;
  GrayImage right;
  int index = 0;
  double timestamp_s = 0.0;
};

struct FrameSequence {
  std::vector<StereoFrame> frames;
  double fps = 0.0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

}  // namespace breathscope
