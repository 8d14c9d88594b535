#pragma once

#include <filesystem>

#include "breathscope/cloud.hpp"

namespace breathscope {

/// ASCII PLY 1.0 with float x/y/z properties (millimetres), one vertex per
/// line, '\n' line endings. Loadable by common point-cloud tools.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

/// Reads an ASCII PLY vertex element with float/double x, y, z properties;
/// other properties and elements are skipped.
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace breathscope
