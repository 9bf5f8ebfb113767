#pragma once

#include <string>

#include "gfp/point_cloud.hpp"

namespace gfp {

/// Reads an ASCII PLY with at least x,y,z vertex properties; nx,ny,nz are
/// loaded when present. Binary PLY is rejected ("unsupported encoding").
PointCloud read_ply(const std::string& path);

/// Writes ASCII PLY, coordinates with 9 significant digits. Output is
/// byte-identical for identical input (no timestamps or comments).
void write_ply(const PointCloud& cloud, const std::string& path);

/// Formats one double the way write_ply does (9 significant digits).
std::string format_coord(double v);

}  // namespace gfp
