#pragma once

#include <cstddef>

#include "gfp/point_cloud.hpp"

namespace gfp {

/// Local modeling unit: a source region S around one GP point and the
/// template region T of the observation inside the same sphere. Coordinates
/// are in a local frame centered at `center` and scaled by 1/radius, so a
/// trained model is independent of object scale. S keeps the GP point itself
/// at slot 0; T may be empty (no observation support).
struct Patch {
  Vec3 center = Vec3::Zero();  // world-frame GP point p_i
  PointCloud source;           // fixed size N, local frame
  PointCloud templ;            // fixed size M or empty, local frame
  double radius = 0.0;         // sphere radius in world units
  std::size_t gp_index = 0;    // index of p_i within the GP cloud
};

}  // namespace gfp
