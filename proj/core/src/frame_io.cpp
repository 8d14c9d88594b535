#include "breathscope/frame_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>

namespace breathscope {

namespace {

// Skips PGM whitespace and '#' comment lines.
void skip_pgm_space(std::istream& in) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

int read_pgm_int(std::istream& in, const std::string& path) {
  skip_pgm_space(in);
  int v;
  if (!(in >> v)) fail(ErrorKind::format, path + ": truncated PGM header");
  return v;
}

std::string substitute_number(const std::string& pattern, int n) {
  std::size_t pos = pattern.find("{n}");
  if (pos == std::string::npos)
    fail(ErrorKind::config, "pattern '" + pattern + "' lacks a {n} placeholder");
  return pattern.substr(0, pos) + std::to_string(n) + pattern.substr(pos + 3);
}

// Builds a regex that captures the frame number where {n} sits.
std::regex pattern_to_regex(const std::string& pattern) {
  std::string re;
  std::size_t pos = pattern.find("{n}");
  if (pos == std::string::npos)
    fail(ErrorKind::config, "pattern '" + pattern + "' lacks a {n} placeholder");
  auto escape = [](const std::string& s) {
    static const std::string special = R"(\.^$|()[]{}*+?)";
    std::string out;
    for (char c : s) {
      if (special.find(c) != std::string::npos) out += '\\';
      out += c;
    }
    return out;
  };
  re = escape(pattern.substr(0, pos)) + "([0-9]+)" +
       escape(pattern.substr(pos + 3));
  return std::regex(re);
}

// Maps frame number -> filename for every directory entry matching pattern.
std::map<int, std::string> scan_numbered(const std::filesystem::path& dir,
                                         const std::string& pattern) {
  std::regex re = pattern_to_regex(pattern);
  std::map<int, std::string> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, re)) {
      int n = std::stoi(m[1].str());
      found[n] = name;
    }
  }
  return found;
}

}  // namespace

SequenceManifest SequenceManifest::parse_file(const std::filesystem::path& path) {
  return from_keyvalue(KeyValueFile::parse_file(path));
}

SequenceManifest SequenceManifest::from_keyvalue(const KeyValueFile& kv) {
  SequenceManifest m;
  m.fps = kv.require_double("fps");
  if (m.fps <= 0.0)
    fail(ErrorKind::config, kv.origin() + ": fps must be positive");
  std::string layout = kv.require_string("layout");
  if (layout == "side_by_side") {
    m.layout = Layout::side_by_side;
    m.pattern = kv.require_string("pattern");
  } else if (layout == "separate") {
    m.layout = Layout::separate;
    m.pattern_left = kv.require_string("pattern_left");
    m.pattern_right = kv.require_string("pattern_right");
  } else {
    fail(ErrorKind::config, kv.origin() +
                                ": layout must be side_by_side or separate, got '" +
                                layout + "'");
  }
  return m;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open image: " + path.string());
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '5')
    fail(ErrorKind::format, path.string() + ": not a binary PGM (P5)");
  int w = read_pgm_int(in, path.string());
  int h = read_pgm_int(in, path.string());
  int maxval = read_pgm_int(in, path.string());
  if (w < 1 || h < 1)
    fail(ErrorKind::format, path.string() + ": bad PGM dimensions");
  if (maxval != 255)
    fail(ErrorKind::format,
         path.string() + ": only 8-bit PGM supported (maxval 255)");
  in.get();  // single whitespace after maxval
  GrayImage img = GrayImage::filled(w, h, 0);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    fail(ErrorKind::format, path.string() + ": truncated PGM pixel data");
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write image: " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_pgm16(const std::filesystem::path& path,
                 const std::vector<std::uint16_t>& data, int width, int height) {
  if (static_cast<std::size_t>(width) * height != data.size())
    fail(ErrorKind::parameter, "pgm16 buffer size does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write image: " + path.string());
  out << "P5\n" << width << " " << height << "\n65535\n";
  for (std::uint16_t v : data) {
    // PGM stores 16-bit samples most significant byte first.
    char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) fail(ErrorKind::io, "write failed: " + path.string());
}

GrayImage read_png_gray8(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) fail(ErrorKind::io, "cannot open image: " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorKind::io, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorKind::format, path.string() + ": libpng failed to decode");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorKind::format,
         path.string() + ": only 8-bit grayscale PNG is supported");
  }
  GrayImage img = GrayImage::filled(static_cast<int>(w), static_cast<int>(h), 0);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.data.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

GrayImage read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png_gray8(path);
  fail(ErrorKind::format, path.string() + ": unsupported image extension");
}

std::pair<GrayImage, GrayImage> split_side_by_side(const GrayImage& composite) {
  if (composite.width % 2 != 0)
    fail(ErrorKind::format, "composite frame width must be even, got " +
                                std::to_string(composite.width));
  int half = composite.width / 2;
  GrayImage left = GrayImage::filled(half, composite.height, 0);
  GrayImage right = GrayImage::filled(half, composite.height, 0);
  for (int y = 0; y < composite.height; ++y) {
    const std::uint8_t* src =
        composite.data.data() + static_cast<std::size_t>(y) * composite.width;
    std::copy(src, src + half,
              left.data.data() + static_cast<std::size_t>(y) * half);
    std::copy(src + half, src + composite.width,
              right.data.data() + static_cast<std::size_t>(y) * half);
  }
  return {std::move(left), std::move(right)};
}

FrameSequence load_frame_sequence(const std::filesystem::path& dir,
                                  const SequenceManifest& manifest) {
  if (!std::filesystem::is_directory(dir))
    fail(ErrorKind::io, "not a directory: " + dir.string());

  auto check_contiguous = [&](const std::map<int, std::string>& found,
                              const std::string& pattern) {
    if (found.empty())
      fail(ErrorKind::sequence,
           "no frames matching '" + pattern + "' in " + dir.string());
    int expect = found.begin()->first;
    for (const auto& [n, name] : found) {
      if (n != expect)
        fail(ErrorKind::sequence, "frame gap: expected " +
                                      substitute_number(pattern, expect) +
                                      ", next file is " + name);
      ++expect;
    }
  };

  FrameSequence seq;
  seq.fps = manifest.fps;

  if (manifest.layout == SequenceManifest::Layout::side_by_side) {
    auto found = scan_numbered(dir, manifest.pattern);
    check_contiguous(found, manifest.pattern);
    int index = 0;
    for (const auto& [n, name] : found) {
      GrayImage composite = read_image(dir / name);
      auto [left, right] = split_side_by_side(composite);
      if (!seq.frames.empty() && !left.same_size(seq.frames.front().left))
        fail(ErrorKind::format, name + ": frame dimensions differ from frame 0");
      StereoFrame f;
      f.left = std::move(left);
      f.right = std::move(right);
      f.index = index;
      f.timestamp_s = index / seq.fps;
      seq.frames.push_back(std::move(f));
      ++index;
    }
  } else {
    auto found_l = scan_numbered(dir, manifest.pattern_left);
    auto found_r = scan_numbered(dir, manifest.pattern_right);
    check_contiguous(found_l, manifest.pattern_left);
    check_contiguous(found_r, manifest.pattern_right);
    if (found_l.size() != found_r.size() ||
        found_l.begin()->first != found_r.begin()->first)
      fail(ErrorKind::sequence, "left/right frame sets do not match in " +
                                    dir.string());
    int index = 0;
    auto it_r = found_r.begin();
    for (auto it_l = found_l.begin(); it_l != found_l.end(); ++it_l, ++it_r) {
      StereoFrame f;
      f.left = read_image(dir / it_l->second);
      f.right = read_image(dir / it_r->second);
      if (!f.left.same_size(f.right))
        fail(ErrorKind::format,
             it_l->second + ": left/right dimensions differ");
      if (!seq.frames.empty() && !f.left.same_size(seq.frames.front().left))
        fail(ErrorKind::format,
             it_l->second + ": frame dimensions differ from frame 0");
      f.index = index;
      f.timestamp_s = index / seq.fps;
      seq.frames.push_back(std::move(f));
      ++index;
    }
  }
  return seq;
}

FrameSequence downsample_sequence(const FrameSequence& seq, int factor) {
  if (factor < 1)
    fail(ErrorKind::parameter,
         "downsample factor must be a positive integer, got " +
             std::to_string(factor));
  if (factor == 1) return seq;
  FrameSequence out;
  out.fps = seq.fps / factor;
  int index = 0;
  for (const StereoFrame& f : seq.frames) {
    if (f.index % factor != 0) continue;
    StereoFrame kept = f;
    kept.index = index;
    kept.timestamp_s = index / out.fps;
    out.frames.push_back(std::move(kept));
    ++index;
  }
  return out;
}

}  // namespace breathscope
