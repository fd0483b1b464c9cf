#include "uvfuse/primitives.hpp"

#include <cmath>
#include <numbers>

#include "uvfuse/texel.hpp"

namespace uvfuse {

namespace {

void finish(TexturedMesh& mesh) { normalize_to_unit_sphere(mesh); }

}  // namespace

TexturedMesh make_cube() {
  TexturedMesh mesh;
  // Each side: outward axis, two in-plane axes (u-axis, v-axis) forming a
  // right-handed frame so that u x v = outward normal.
  struct Side {
    Vec3 n, u, v;
  };
  const Side sides[6] = {
      {{1, 0, 0}, {0, 0, -1}, {0, 1, 0}},  {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}},
      {{0, 1, 0}, {1, 0, 0}, {0, 0, -1}},  {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}},
      {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},   {{0, 0, -1}, {-1, 0, 0}, {0, 1, 0}},
  };
  constexpr double cell_w = 1.0 / 3.0;
  constexpr double cell_h = 0.5;
  constexpr double chart = 0.3;  // square chart side in UV units
  for (int s = 0; s < 6; ++s) {
    const auto& side = sides[s];
    const int base = static_cast<int>(mesh.vertices.size());
    const Vec2 origin((s % 3) * cell_w + 0.5 * (cell_w - chart), (s / 3) * cell_h + 0.5 * (cell_h - chart));
    const double cu[4] = {-1, 1, 1, -1};
    const double cv[4] = {-1, -1, 1, 1};
    Vec2 uv[4];
    for (int k = 0; k < 4; ++k) {
      mesh.vertices.push_back(side.n + cu[k] * side.u + cv[k] * side.v);
      uv[k] = origin + chart * Vec2(0.5 * (cu[k] + 1), 0.5 * (cv[k] + 1));
    }
    mesh.triangles.push_back({base, base + 1, base + 2});
    mesh.uv_coords.push_back({uv[0], uv[1], uv[2]});
    mesh.triangles.push_back({base, base + 2, base + 3});
    mesh.uv_coords.push_back({uv[0], uv[2], uv[3]});
  }
  finish(mesh);
  return mesh;
}

TexturedMesh make_tetrahedron() {
  TexturedMesh mesh;
  mesh.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  const std::array<int, 3> faces[4] = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  for (int f = 0; f < 4; ++f) {
    mesh.triangles.push_back(faces[f]);
    const Vec2 o((f % 2) * 0.5 + 0.05, (f / 2) * 0.5 + 0.05);
    mesh.uv_coords.push_back({o, o + Vec2(0.4, 0.0), o + Vec2(0.2, 0.35)});
  }
  finish(mesh);
  return mesh;
}

TexturedMesh make_uv_sphere(int stacks, int slices) {
  TexturedMesh mesh;
  using std::numbers::pi;
  for (int i = 0; i <= stacks; ++i) {
    const double theta = pi * i / stacks;  // 0 at north pole
    for (int j = 0; j <= slices; ++j) {
      const double phi = 2.0 * pi * j / slices;
      mesh.vertices.emplace_back(std::sin(theta) * std::cos(phi), std::cos(theta),
                                 -std::sin(theta) * std::sin(phi));
    }
  }
  auto idx = [&](int i, int j) { return i * (slices + 1) + j; };
  auto uv = [&](int i, int j) {
    return Vec2(static_cast<double>(j) / slices, 1.0 - static_cast<double>(i) / stacks);
  };
  for (int i = 0; i < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      if (i != 0) {
        mesh.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i, j + 1)});
        mesh.uv_coords.push_back({uv(i, j), uv(i + 1, j), uv(i, j + 1)});
      }
      if (i != stacks - 1) {
        mesh.triangles.push_back({idx(i, j + 1), idx(i + 1, j), idx(i + 1, j + 1)});
        mesh.uv_coords.push_back({uv(i, j + 1), uv(i + 1, j), uv(i + 1, j + 1)});
      }
    }
  }
  finish(mesh);
  return mesh;
}

TexturedMesh make_quad(double side, double z) {
  TexturedMesh mesh;
  const double h = 0.5 * side;
  mesh.vertices = {{-h, -h, z}, {h, -h, z}, {h, h, z}, {-h, h, z}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  mesh.uv_coords = {{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1)}, {Vec2(0, 0), Vec2(1, 1), Vec2(0, 1)}};
  compute_face_attributes(mesh);
  return mesh;
}

Image make_checkerboard(int resolution, int squares, const Vec3& a, const Vec3& b,
                        double edge_softness) {
  Image img(3, resolution, resolution);
  const double cell = static_cast<double>(resolution) / squares;
  // Signed distance-like profile per axis: +1 inside even cells, -1 in odd.
  auto profile = [&](double p) {
    const double local = std::fmod(p, 2.0 * cell);
    const double d = std::min({local, std::abs(local - cell), 2.0 * cell - local});
    const double sign = local < cell ? 1.0 : -1.0;
    if (edge_softness <= 0.0) return sign;
    return sign * std::tanh(d / edge_softness);
  };
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const double s = profile(x + 0.5) * profile(y + 0.5);  // in [-1, 1]
      const double t = 0.5 * (s + 1.0);                      // 1 -> a, 0 -> b
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(t * a[c] + (1.0 - t) * b[c]);
    }
  }
  return img;
}

}  // namespace uvfuse
