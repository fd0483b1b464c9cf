#pragma once

#include <algorithm>
#include <cmath>

#include "uvfuse/geometry.hpp"

namespace uvfuse {

// UV convention shared by splatting, sampling and PNG export: texel (x, y) has
// its center at u = (x + 0.5) / R, v = 1 - (y + 0.5) / R, so row 0 is the top
// of the texture image (v close to 1).

/// Continuous texel coordinates; integer values are texel centers.
inline Vec2 texel_coords(const Vec2& uv, int res) {
  return {uv.x() * res - 0.5, (1.0 - uv.y()) * res - 0.5};
}

inline Vec2 texel_center_uv(int x, int y, int res) {
  return {(x + 0.5) / res, 1.0 - (y + 0.5) / res};
}

/// Index of the texel containing `uv` (nearest texel center).
inline int nearest_texel(double u, double v, int res) {
  const int x = std::clamp(static_cast<int>(std::floor(u * res)), 0, res - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - v) * res)), 0, res - 1);
  return y * res + x;
}

}  // namespace uvfuse
