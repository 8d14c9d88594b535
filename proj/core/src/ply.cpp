#include "breathscope/ply.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "breathscope/error.hpp"

namespace breathscope {

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write ply: " + path.string());
  std::fprintf(fp,
               "ply\nformat ascii 1.0\nelement vertex %zu\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n",
               cloud.size());
  for (const auto& p : cloud.points) {
    std::fprintf(fp, "%.9g %.9g %.9g\n", static_cast<double>(static_cast<float>(p.x())),
                 static_cast<double>(static_cast<float>(p.y())),
                 static_cast<double>(static_cast<float>(p.z())));
  }
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open ply: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    fail(ErrorKind::format, path.string() + ": missing ply magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment") continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (word == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty())
        fail(ErrorKind::format, path.string() + ": property before element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string t2, t3;
        ls >> t2 >> t3 >> name;
      } else {
        ls >> name;
      }
      elements.back().properties.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii)
    fail(ErrorKind::format, path.string() + ": only ascii ply supported");

  PointCloud cloud;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i) std::getline(in, line);
      continue;
    }
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      if (e.properties[p] == "x") ix = static_cast<int>(p);
      if (e.properties[p] == "y") iy = static_cast<int>(p);
      if (e.properties[p] == "z") iz = static_cast<int>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0)
      fail(ErrorKind::format, path.string() + ": vertex element lacks x/y/z");
    cloud.points.reserve(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      if (!std::getline(in, line))
        fail(ErrorKind::format, path.string() + ": truncated vertex data");
      std::istringstream ls(line);
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      if (static_cast<int>(vals.size()) <= std::max({ix, iy, iz}))
        fail(ErrorKind::format, path.string() + ": short vertex line");
      cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
  }
  return cloud;
}

}  // namespace breathscope
