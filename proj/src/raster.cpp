#include "uvfuse/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "uvfuse/texel.hpp"

namespace uvfuse {

ViewBuffers::ViewBuffers(int s)
    : size(s),
      depth(pixels(), kBackgroundDepth),
      normal(pixels() * 3, 0.0f),
      uv(pixels() * 2, 0.0f),
      face_id(pixels(), -1),
      mask(pixels(), 0),
      score(pixels(), 0.0f) {}

std::size_t ViewBuffers::foreground_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

constexpr double kNearPlane = 0.05;

// Screen-space setup of one triangle for one camera.
struct TriangleSetup {
  int face = -1;
  std::array<Vec2, 3> screen;
  std::array<double, 3> inv_w;  // 1 / view depth per corner
  std::array<Vec3, 3> world;
  std::array<Vec2, 3> uv;
  Vec3 normal_world;
  Vec3 normal_cam;
  double inv_area2 = 0.0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
};

double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

bool setup_triangle(const TexturedMesh& mesh, const CameraPose& pose, std::size_t f, TriangleSetup& t) {
  if (mesh.degenerate[f]) return false;
  t.face = static_cast<int>(f);
  t.world = mesh.corners(f);
  t.uv = mesh.uv_coords[f];
  for (int k = 0; k < 3; ++k) {
    const Vec3 pc = pose.to_camera(t.world[k]);
    // Triangles crossing the near plane are dropped; normalized meshes seen
    // from outside the unit sphere never reach it.
    if (-pc.z() < kNearPlane) return false;
    t.screen[k] = pose.project_camera(pc);
    t.inv_w[k] = 1.0 / -pc.z();
  }
  const double area2 = edge(t.screen[0], t.screen[1], t.screen[2]);
  if (std::abs(area2) < 1e-12) return false;
  t.inv_area2 = 1.0 / area2;
  t.normal_world = mesh.face_normals[f];
  t.normal_cam = Vec3(pose.right().dot(t.normal_world), pose.up.dot(t.normal_world),
                      pose.forward.dot(t.normal_world));
  const int n = pose.image_size;
  const double min_x = std::min({t.screen[0].x(), t.screen[1].x(), t.screen[2].x()});
  const double max_x = std::max({t.screen[0].x(), t.screen[1].x(), t.screen[2].x()});
  const double min_y = std::min({t.screen[0].y(), t.screen[1].y(), t.screen[2].y()});
  const double max_y = std::max({t.screen[0].y(), t.screen[1].y(), t.screen[2].y()});
  // Pixel centers sit at integer + 0.5.
  t.x0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
  t.x1 = std::min(n - 1, static_cast<int>(std::floor(max_x - 0.5)));
  t.y0 = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
  t.y1 = std::min(n - 1, static_cast<int>(std::floor(max_y - 0.5)));
  return t.x0 <= t.x1 && t.y0 <= t.y1;
}

// Depth-tests and shades one pixel. Identical arithmetic in every code path.
inline void shade_pixel(const TriangleSetup& t, const CameraPose& pose, int x, int y, ViewBuffers& buf) {
  const Vec2 q(x + 0.5, y + 0.5);
  const double b0 = edge(t.screen[1], t.screen[2], q) * t.inv_area2;
  const double b1 = edge(t.screen[2], t.screen[0], q) * t.inv_area2;
  const double b2 = edge(t.screen[0], t.screen[1], q) * t.inv_area2;
  if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) return;

  const double p0 = b0 * t.inv_w[0];
  const double p1 = b1 * t.inv_w[1];
  const double p2 = b2 * t.inv_w[2];
  const double inv_sum = 1.0 / (p0 + p1 + p2);
  const float depth = static_cast<float>(inv_sum);
  const std::size_t i = static_cast<std::size_t>(y) * buf.size + x;
  if (depth > buf.depth[i] || (depth == buf.depth[i] && t.face > buf.face_id[i])) return;

  const double l0 = p0 * inv_sum, l1 = p1 * inv_sum, l2 = p2 * inv_sum;
  const Vec2 uv = l0 * t.uv[0] + l1 * t.uv[1] + l2 * t.uv[2];
  const Vec3 world = l0 * t.world[0] + l1 * t.world[1] + l2 * t.world[2];
  const Vec3 to_camera = (pose.position - world).normalized();
  const double s = std::clamp(t.normal_world.dot(to_camera), 0.0, 1.0);

  buf.depth[i] = depth;
  buf.face_id[i] = t.face;
  buf.mask[i] = 1;
  buf.score[i] = static_cast<float>(s);
  buf.uv[2 * i] = static_cast<float>(std::clamp(uv.x(), 0.0, 1.0));
  buf.uv[2 * i + 1] = static_cast<float>(std::clamp(uv.y(), 0.0, 1.0));
  for (int k = 0; k < 3; ++k) buf.normal[3 * i + k] = static_cast<float>(t.normal_cam[k]);
}

std::vector<TriangleSetup> setup_all(const TexturedMesh& mesh, const CameraPose& pose) {
  std::vector<TriangleSetup> tris;
  tris.reserve(mesh.face_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    TriangleSetup t;
    if (setup_triangle(mesh, pose, f, t)) tris.push_back(t);
  }
  return tris;
}

}  // namespace

namespace serial {

ViewBuffers rasterize(const TexturedMesh& mesh, const CameraPose& pose) {
  ViewBuffers buf(pose.image_size);
  for (const auto& t : setup_all(mesh, pose)) {
    for (int y = t.y0; y <= t.y1; ++y) {
      for (int x = t.x0; x <= t.x1; ++x) shade_pixel(t, pose, x, y, buf);
    }
  }
  return buf;
}

}  // namespace serial

ViewBuffers rasterize(const TexturedMesh& mesh, const CameraPose& pose) {
  constexpr int kBandRows = 8;
  ViewBuffers buf(pose.image_size);
  const auto tris = setup_all(mesh, pose);
  const int bands = (pose.image_size + kBandRows - 1) / kBandRows;
  std::vector<std::vector<int>> bins(bands);
  for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
    for (int b = tris[i].y0 / kBandRows; b <= tris[i].y1 / kBandRows; ++b) bins[b].push_back(i);
  }
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < bands; ++b) {
    const int row0 = b * kBandRows;
    const int row1 = std::min(pose.image_size - 1, row0 + kBandRows - 1);
    for (int i : bins[b]) {
      const auto& t = tris[i];
      for (int y = std::max(row0, t.y0); y <= std::min(row1, t.y1); ++y) {
        for (int x = t.x0; x <= t.x1; ++x) shade_pixel(t, pose, x, y, buf);
      }
    }
  }
  return buf;
}

std::vector<ViewBuffers> rasterize_rig(const TexturedMesh& mesh, const ViewRig& rig) {
  std::vector<ViewBuffers> out(rig.size());
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < static_cast<int>(rig.size()); ++v) out[v] = rasterize(mesh, rig.poses[v]);
  return out;
}

ConditionImages make_condition_images(const ViewBuffers& buf) {
  const int n = buf.size;
  ConditionImages out{Image(1, n, n), Image(1, n, n)};
  float d_min = std::numeric_limits<float>::infinity();
  float d_max = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < buf.pixels(); ++i) {
    if (!buf.mask[i]) continue;
    d_min = std::min(d_min, buf.depth[i]);
    d_max = std::max(d_max, buf.depth[i]);
  }
  if (!(d_min <= d_max)) return out;  // no foreground

  const float range = d_max - d_min;
  auto& dimg = out.depth_image.data;
  for (std::size_t i = 0; i < buf.pixels(); ++i) {
    if (!buf.mask[i]) continue;
    dimg[i] = range > 0.0f ? (d_max - buf.depth[i]) / range : 1.0f;
  }

  constexpr float kDepthJump = 0.1f;
  const float cos_limit = static_cast<float>(std::cos(25.0 * 3.14159265358979323846 / 180.0));
  std::vector<std::uint8_t> edges(buf.pixels(), 0);
  auto differs = [&](std::size_t a, std::size_t b) {
    if (!buf.mask[b]) return true;  // silhouette
    if (std::abs(dimg[a] - dimg[b]) > kDepthJump) return true;
    float dot = 0.0f;
    for (int k = 0; k < 3; ++k) dot += buf.normal[3 * a + k] * buf.normal[3 * b + k];
    return dot < cos_limit;
  };
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      if (!buf.mask[i]) continue;
      const bool edge_px = (x > 0 && differs(i, i - 1)) || (x < n - 1 && differs(i, i + 1)) ||
                           (y > 0 && differs(i, i - n)) || (y < n - 1 && differs(i, i + n));
      edges[i] = edge_px ? 1 : 0;
    }
  }
  // 1-pixel dilation, kept on the foreground.
  auto& line = out.lineart_image.data;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      if (!buf.mask[i]) continue;
      bool hit = false;
      for (int dy = -1; dy <= 1 && !hit; ++dy) {
        for (int dx = -1; dx <= 1 && !hit; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= n || yy >= n) continue;
          hit = edges[static_cast<std::size_t>(yy) * n + xx] != 0;
        }
      }
      line[i] = hit ? 1.0f : 0.0f;
    }
  }
  return out;
}

void sample_bilinear(const Image& tex, double u, double v, float* out) {
  const int res_x = tex.width;
  const int res_y = tex.height;
  const double fx = std::clamp(u * res_x - 0.5, 0.0, static_cast<double>(res_x - 1));
  const double fy = std::clamp((1.0 - v) * res_y - 0.5, 0.0, static_cast<double>(res_y - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, res_x - 1);
  const int y1 = std::min(y0 + 1, res_y - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  for (int c = 0; c < tex.channels; ++c) {
    const double top = (1 - ax) * tex.at(c, y0, x0) + ax * tex.at(c, y0, x1);
    const double bot = (1 - ax) * tex.at(c, y1, x0) + ax * tex.at(c, y1, x1);
    out[c] = static_cast<float>((1 - ay) * top + ay * bot);
  }
}

Image render_texture(const Image& texture, const ViewBuffers& buf, float background) {
  Image img(texture.channels, buf.size, buf.size, background);
  std::vector<float> px(texture.channels);
#pragma omp parallel for firstprivate(px)
  for (int y = 0; y < buf.size; ++y) {
    for (int x = 0; x < buf.size; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * buf.size + x;
      if (!buf.mask[i]) continue;
      sample_bilinear(texture, buf.uv[2 * i], buf.uv[2 * i + 1], px.data());
      for (int c = 0; c < texture.channels; ++c) img.at(c, y, x) = px[c];
    }
  }
  return img;
}

void export_buffers_png(const ViewBuffers& buf, const std::string& prefix) {
  const auto cond = make_condition_images(buf);
  write_png_gray16(prefix + "_depth.png", cond.depth_image);
  write_png_gray8(prefix + "_lineart.png", cond.lineart_image);
  Image score(1, buf.size, buf.size);
  std::copy(buf.score.begin(), buf.score.end(), score.data.begin());
  write_png_gray16(prefix + "_score.png", score);
  Image normals(3, buf.size, buf.size);
  for (std::size_t i = 0; i < buf.pixels(); ++i) {
    for (int k = 0; k < 3; ++k) normals.data[k * buf.pixels() + i] = buf.mask[i] ? buf.normal[3 * i + k] : -1.0f;
  }
  write_png_rgb8(prefix + "_normal.png", normals);
}

}  // namespace uvfuse
