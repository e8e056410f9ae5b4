#pragma once

#include <string>

#include "dpn/geometry.hpp"

namespace dpn {

/// A segmented RGB-D observation: camera-frame points with per-point RGB in [0,1].
struct Crop {
  PointSet points;
  std::vector<Vec3> colors;
  std::string category;
  int instance = 0;
};

Vec3 centroid(const PointSet& points);

}  // namespace dpn
