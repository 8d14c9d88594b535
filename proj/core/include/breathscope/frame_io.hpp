#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "breathscope/image.hpp"
#include "breathscope/keyvalue.hpp"

namespace breathscope {

/// Describes how the numbered frame files in a directory form a stereo
/// sequence. Plain-text `key = value` file with keys:
///   fps           capture rate in Hz (required, > 0)
///   layout        side_by_side | separate
///   pattern       filename pattern with {n} placeholder (side_by_side)
///   pattern_left  / pattern_right   (separate layout)
struct SequenceManifest {
  double fps = 0.0;
  enum class Layout { side_by_side, separate } layout = Layout::side_by_side;
  std::string pattern;        // side_by_side layout
  std::string pattern_left;   // separate layout
  std::string pattern_right;  // separate layout

  static SequenceManifest parse_file(const std::filesystem::path& path);
  static SequenceManifest from_keyvalue(const KeyValueFile& kv);
};

// Image file readers/writers. PGM is binary P5 with maxval 255; PNG must be
// 8-bit single-channel grayscale (color inputs are rejected, not converted).
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_pgm16(const std::filesystem::path& path,
                 const std::vector<std::uint16_t>& data, int width, int height);
GrayImage read_png_gray8(const std::filesystem::path& path);

/// Dispatches on file extension (.pgm / .png).
GrayImage read_image(const std::filesystem::path& path);

/// Loads all numbered frames matching the manifest. Frame numbers must be
/// contiguous; the sequence is renumbered from 0 regardless of the starting
/// number on disk.
FrameSequence load_frame_sequence(const std::filesystem::path& dir,
                                  const SequenceManifest& manifest);

/// Splits a composite frame into equal left/right halves by column.
std::pair<GrayImage, GrayImage> split_side_by_side(const GrayImage& composite);

/// Keeps every factor-th frame (those with index % factor == 0), renumbers
/// from 0 and divides fps accordingly.
FrameSequence downsample_sequence(const FrameSequence& seq, int factor);

}  // namespace breathscope
