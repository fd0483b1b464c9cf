#include "uvfuse/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "uvfuse/error.hpp"
#include "uvfuse/texel.hpp"

namespace uvfuse {

std::size_t TexturedMesh::valid_face_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 0));
}

double TexturedMesh::total_area() const {
  double sum = 0.0;
  for (double a : face_areas) sum += a;
  return sum;
}

FaceNormalArea compute_face_normal_area(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  const Vec3 cross = (v1 - v0).cross(v2 - v0);
  const double norm = cross.norm();
  FaceNormalArea out;
  out.area = 0.5 * norm;
  if (out.area < kDegenerateArea) {
    out.area = 0.0;
    out.degenerate = true;
    return out;
  }
  out.normal = cross / norm;
  return out;
}

void compute_face_attributes(TexturedMesh& mesh) {
  const std::size_t n = mesh.triangles.size();
  mesh.face_normals.assign(n, Vec3::Zero());
  mesh.face_areas.assign(n, 0.0);
  mesh.degenerate.assign(n, 0);
  for (std::size_t f = 0; f < n; ++f) {
    const auto [a, b, c] = mesh.corners(f);
    const auto na = compute_face_normal_area(a, b, c);
    mesh.face_normals[f] = na.normal;
    mesh.face_areas[f] = na.area;
    mesh.degenerate[f] = na.degenerate ? 1 : 0;
  }
}

namespace {

// Resolves a 1-based (or negative, relative) OBJ index against `count` entries.
int resolve_index(std::string_view token, std::size_t count, int line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value == 0) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad index '" +
                                      std::string(token) + "'");
  }
  const long idx = value > 0 ? value - 1 : static_cast<long>(count) + value;
  if (idx < 0 || idx >= static_cast<long>(count)) {
    throw Error(ErrorCode::Parse,
                "line " + std::to_string(line_no) + ": index out of range '" + std::string(token) + "'");
  }
  return static_cast<int>(idx);
}

double read_number(std::istringstream& ss, int line_no) {
  double v = 0.0;
  if (!(ss >> v) || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected a number");
  }
  return v;
}

}  // namespace

TexturedMesh parse_obj(std::istream& in) {
  TexturedMesh mesh;
  std::vector<Vec2> texcoords;
  std::string line;
  int line_no = 0;
  constexpr double kUvSlack = 1e-6;

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;

    if (tag == "v") {
      const double x = read_number(ss, line_no);
      const double y = read_number(ss, line_no);
      const double z = read_number(ss, line_no);
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "vt") {
      const double u = read_number(ss, line_no);
      const double v = read_number(ss, line_no);
      if (u < -kUvSlack || u > 1 + kUvSlack || v < -kUvSlack || v > 1 + kUvSlack) {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": texture coordinate outside [0,1]^2");
      }
      texcoords.emplace_back(std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0));
    } else if (tag == "f") {
      std::vector<int> vi;
      std::vector<int> ti;
      std::string corner;
      while (ss >> corner) {
        const auto slash = corner.find('/');
        vi.push_back(resolve_index(std::string_view(corner).substr(0, slash), mesh.vertices.size(),
                                   line_no));
        if (slash == std::string::npos) {
          throw Error(ErrorCode::MissingUv, "line " + std::to_string(line_no) +
                                                ": face corner without texture coordinate");
        }
        const auto rest = std::string_view(corner).substr(slash + 1);
        const auto tex = rest.substr(0, rest.find('/'));
        if (tex.empty()) {
          throw Error(ErrorCode::MissingUv, "line " + std::to_string(line_no) +
                                                ": face corner without texture coordinate");
        }
        ti.push_back(resolve_index(tex, texcoords.size(), line_no));
      }
      if (vi.size() < 3) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": face with < 3 corners");
      }
      for (std::size_t k = 1; k + 1 < vi.size(); ++k) {
        mesh.triangles.push_back({vi[0], vi[k], vi[k + 1]});
        mesh.uv_coords.push_back({texcoords[ti[0]], texcoords[ti[k]], texcoords[ti[k + 1]]});
      }
    }
    // Other records (vn, o, g, s, usemtl, mtllib, l, ...) are ignored.
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failure");
  if (mesh.triangles.empty()) throw Error(ErrorCode::Parse, "no faces");
  compute_face_attributes(mesh);
  return mesh;
}

void normalize_to_unit_sphere(TexturedMesh& mesh) {
  if (mesh.vertices.empty()) return;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 center = 0.5 * (lo + hi);
  double radius = 0.0;
  for (const auto& v : mesh.vertices) radius = std::max(radius, (v - center).norm());
  const double scale = radius > 0.0 ? 1.0 / radius : 1.0;
  for (auto& v : mesh.vertices) v = (v - center) * scale;
  compute_face_attributes(mesh);
}

TexturedMesh load_mesh(std::istream& in) {
  TexturedMesh mesh = parse_obj(in);
  if (mesh.valid_face_count() == 0) {
    throw Error(ErrorCode::DegenerateMesh, "all faces have zero area");
  }
  normalize_to_unit_sphere(mesh);
  if (const double overlap = uv_overlap_fraction(mesh); overlap > 0.0) {
    std::clog << "warning: " << overlap * 100.0
              << "% of UV texels are claimed by overlapping charts; splats there are ambiguous\n";
  }
  return mesh;
}

TexturedMesh load_mesh(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path);
  return load_mesh(file);
}

void write_obj(const std::string& path, const TexturedMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& uv : mesh.uv_coords) {
    for (const auto& c : uv) out << "vt " << c.x() << ' ' << c.y() << '\n';
  }
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    out << 'f';
    for (int k = 0; k < 3; ++k) out << ' ' << t[k] + 1 << '/' << 3 * f + k + 1;
    out << '\n';
  }
}

namespace {

// Calls fn(texel_index) for every texel whose center lies inside the UV
// triangle. Edges count as inside unless `strict`.
template <class Fn>
void for_each_texel_in_uv_triangle(const std::array<Vec2, 3>& uv, int res, bool strict, Fn&& fn) {
  std::array<Vec2, 3> p;
  for (int k = 0; k < 3; ++k) p[k] = texel_coords(uv[k], res);
  const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
  if (std::abs(area) < 1e-14) return;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}))));
  const int x1 = std::min(res - 1, static_cast<int>(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}))));
  const int y1 = std::min(res - 1, static_cast<int>(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}))));
  const double eps = strict ? -1e-9 : 1e-9;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 q(x, y);
      double w[3];
      for (int k = 0; k < 3; ++k) {
        const Vec2& a = p[(k + 1) % 3];
        const Vec2& b = p[(k + 2) % 3];
        w[k] = ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / area;
      }
      if (w[0] >= -eps && w[1] >= -eps && w[2] >= -eps) fn(static_cast<std::size_t>(y) * res + x);
    }
  }
}

}  // namespace

double uv_overlap_fraction(const TexturedMesh& mesh, int resolution) {
  std::vector<int> owner(static_cast<std::size_t>(resolution) * resolution, -1);
  std::vector<std::uint8_t> shared(owner.size(), 0);
  std::size_t covered = 0;
  std::size_t overlapping = 0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    if (mesh.degenerate[f]) continue;
    for_each_texel_in_uv_triangle(mesh.uv_coords[f], resolution, true, [&](std::size_t t) {
      if (owner[t] < 0) {
        owner[t] = static_cast<int>(f);
        ++covered;
      } else if (owner[t] != static_cast<int>(f) && !shared[t]) {
        shared[t] = 1;
        ++overlapping;
      }
    });
  }
  if (covered == 0) return 0.0;
  return static_cast<double>(overlapping) / static_cast<double>(covered);
}

std::vector<std::uint8_t> atlas_mask(const TexturedMesh& mesh, int resolution) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(resolution) * resolution, 0);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    if (mesh.degenerate[f]) continue;
    for_each_texel_in_uv_triangle(mesh.uv_coords[f], resolution, false,
                                  [&](std::size_t t) { mask[t] = 1; });
  }
  return mask;
}

}  // namespace uvfuse
