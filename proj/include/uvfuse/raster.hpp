#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uvfuse/cameras.hpp"
#include "uvfuse/geometry.hpp"
#include "uvfuse/image.hpp"

namespace uvfuse {

/// Per-view rasterization products. All planes are row-major, `size` x `size`.
struct ViewBuffers {
  static constexpr float kBackgroundDepth = std::numeric_limits<float>::infinity();

  int size = 0;
  std::vector<float> depth;          // view-space depth (distance along the optical axis)
  std::vector<float> normal;         // 3 floats per pixel, camera space
  std::vector<float> uv;             // 2 floats per pixel
  std::vector<std::int32_t> face_id; // -1 on background
  std::vector<std::uint8_t> mask;
  std::vector<float> score;          // max(0, n . v)

  explicit ViewBuffers(int s = 0);
  std::size_t pixels() const { return static_cast<std::size_t>(size) * size; }
  std::size_t foreground_count() const;
  bool operator==(const ViewBuffers&) const = default;
};

/// Depth and lineart conditioning images for the diffusion service.
struct ConditionImages {
  Image depth_image;    // 1 x size x size, [0,1], background 0
  Image lineart_image;  // 1 x size x size, {0,1}, background 0
};

/// Rasterizes all non-degenerate faces, rows processed in parallel (OpenMP).
/// Ties in depth go to the lower face index, so output is identical to
/// serial::rasterize for any thread count.
ViewBuffers rasterize(const TexturedMesh& mesh, const CameraPose& pose);

/// Rasterizes every pose of the rig, views processed in parallel.
std::vector<ViewBuffers> rasterize_rig(const TexturedMesh& mesh, const ViewRig& rig);

ConditionImages make_condition_images(const ViewBuffers& buffers);

/// Bilinear texture lookup at `uv` (clamped at the border), written to `out`.
void sample_bilinear(const Image& texture, double u, double v, float* out);

/// Renders `texture` through the per-pixel UV buffer: foreground pixels get
/// the bilinear texture sample, background pixels `background`.
Image render_texture(const Image& texture, const ViewBuffers& buffers, float background = 1.0f);

/// Debug exports: depth and score as 16-bit grayscale, normals as RGB8.
void export_buffers_png(const ViewBuffers& buffers, const std::string& prefix);

namespace serial {

/// Reference single-threaded rasterizer: whole-image scan per triangle in
/// face order.
ViewBuffers rasterize(const TexturedMesh& mesh, const CameraPose& pose);

}  // namespace serial

}  // namespace uvfuse
