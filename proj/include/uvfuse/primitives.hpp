#pragma once

#include "uvfuse/geometry.hpp"
#include "uvfuse/image.hpp"

namespace uvfuse {

// Procedural meshes and textures used by the test suites, the benchmark and
// the CLI demo path. All meshes come back normalized to the unit sphere.

/// Axis-aligned cube, 12 triangles, one square UV chart per side laid out on
/// a 3x2 grid.
TexturedMesh make_cube();

/// Regular tetrahedron, 4 faces, one UV triangle per face.
TexturedMesh make_tetrahedron();

/// Latitude/longitude sphere with an equirectangular atlas.
TexturedMesh make_uv_sphere(int stacks, int slices);

/// Unit square in the plane z = 0 (normal +z), centered at the origin,
/// side `side`, not normalized, UVs spanning [0,1]^2.
TexturedMesh make_quad(double side = 1.0, double z = 0.0);

/// Checkerboard texture with `squares` cells per side and colors `a`, `b`.
/// `edge_softness` (in texels) replaces the hard edge with a smooth ramp;
/// 0 keeps it sharp.
Image make_checkerboard(int resolution, int squares, const Vec3& a, const Vec3& b,
                        double edge_softness = 0.0);

}  // namespace uvfuse
