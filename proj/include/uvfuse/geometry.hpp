#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace uvfuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Triangle mesh with a per-corner UV atlas. Immutable once loaded.
struct TexturedMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<Vec2, 3>> uv_coords;  // per triangle corner, in [0,1]^2
  std::vector<Vec3> face_normals;              // unit, or zero when degenerate
  std::vector<double> face_areas;
  std::vector<std::uint8_t> degenerate;        // 1 when area < kDegenerateArea

  std::size_t face_count() const { return triangles.size(); }
  std::size_t valid_face_count() const;
  double total_area() const;
  std::array<Vec3, 3> corners(std::size_t face) const {
    const auto& t = triangles[face];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
};

inline constexpr double kDegenerateArea = 1e-12;

struct FaceNormalArea {
  Vec3 normal = Vec3::Zero();
  double area = 0.0;
  bool degenerate = false;
};

FaceNormalArea compute_face_normal_area(const Vec3& v0, const Vec3& v1, const Vec3& v2);

/// Parses Wavefront OBJ text (`v`, `vt`, `f v/vt[/vn]`). Polygons are fan
/// triangulated; normals in the file are ignored. No normalization is applied.
TexturedMesh parse_obj(std::istream& in);

/// Recomputes face normals, areas and degenerate flags from positions.
void compute_face_attributes(TexturedMesh& mesh);

/// Centers the mesh at its bounding-box center and scales it so the bounding
/// sphere (around that center) has radius 1.
void normalize_to_unit_sphere(TexturedMesh& mesh);

/// Parse + validate + normalize. Throws Error{MissingUv, Parse, DegenerateMesh, Io}.
TexturedMesh load_mesh(const std::string& path);
TexturedMesh load_mesh(std::istream& in);

void write_obj(const std::string& path, const TexturedMesh& mesh);

/// Fraction of atlas texels (at `resolution`) claimed by more than one face.
double uv_overlap_fraction(const TexturedMesh& mesh, int resolution = 256);

/// Per-texel mask (row 0 = v near 1) of texels whose centers fall inside a
/// non-degenerate UV triangle.
std::vector<std::uint8_t> atlas_mask(const TexturedMesh& mesh, int resolution);

}  // namespace uvfuse
