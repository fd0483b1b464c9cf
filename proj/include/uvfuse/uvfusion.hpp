#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "uvfuse/image.hpp"
#include "uvfuse/raster.hpp"

namespace uvfuse {

/// Fusion workspace at one texture resolution. For every texel it holds
/// sum_j e^{s_j / temperature} * color_j and sum_j e^{s_j / temperature} over
/// all visible pixels j (from any view) whose UV falls in that texel.
struct UvAccumulator {
  int resolution = 0;
  int channels = 0;
  std::vector<double> weighted_sum;  // channels x R x R
  std::vector<double> weight_total;  // R x R

  UvAccumulator() = default;
  UvAccumulator(int res, int ch);

  std::size_t texels() const { return static_cast<std::size_t>(resolution) * resolution; }
  bool covered(std::size_t texel) const { return weight_total[texel] > 0.0; }
  double fused(int c, std::size_t texel) const {
    return weighted_sum[c * texels() + texel] / weight_total[texel];
  }
  std::vector<std::uint8_t> coverage() const;
  /// Fused colors with `hole` in uncovered texels.
  Image fused_image(float hole = 0.0f) const;
  bool operator==(const UvAccumulator&) const = default;
};

/// Blend weights of the 128 / 256 / 512 textures.
struct ScaleWeights {
  double w128 = 1.0;
  double w256 = 0.0;
  double w512 = 0.0;

  std::array<double, 3> as_array() const { return {w128, w256, w512}; }
};

/// Multi-scale schedule over denoising progress p in [0, 1]: all weight on
/// 128 at p = 0, moved linearly to 256 by p = 0.3, then linearly split
/// toward 256/512 = 0.4/0.6 at p = 1. Throws OutOfRange.
ScaleWeights scale_weights(double progress);

/// Nearest-texel splat of every foreground pixel of every view with softmax
/// weight e^{score / temperature}. Views are accumulated privately and merged
/// in view order, so the result is bit-identical to serial::splat.
UvAccumulator splat(const Tensor4& view_images, std::span<const ViewBuffers> buffers, int resolution,
                    double temperature = 1.0);

/// Per-view x0^md: each foreground pixel samples every weighted level
/// bilinearly at its UV (uncovered taps replaced by the nearest covered texel
/// within 3 texels, otherwise the level is dropped for that pixel) and blends
/// levels with renormalized `level_weights`. Background pixels, and pixels no
/// level can serve, copy `fallback`.
Tensor4 unproject(std::span<const UvAccumulator> levels, std::span<const double> level_weights,
                  std::span<const ViewBuffers> buffers, const Tensor4& fallback);

struct FusedTexture {
  Image texture;                       // at the finest level's resolution
  std::vector<std::uint8_t> hole_mask; // 1 = covered at no level
  std::size_t hole_count() const;
};

/// Composite at the finest resolution: coarser levels are upsampled with
/// coverage-masked bilinear interpolation, then blended with per-texel
/// renormalized `level_weights`.
FusedTexture fused_texture(std::span<const UvAccumulator> levels, std::span<const double> level_weights,
                           float hole = 0.0f);

/// Per-level texture with holes replaced by the nearest covered texel within
/// `radius` texels; `valid` marks texels that have a value.
struct FilledLevel {
  int resolution = 0;
  int channels = 0;
  std::vector<float> color;           // channels x R x R
  std::vector<std::uint8_t> valid;
};
FilledLevel fill_from_neighbors(const UvAccumulator& level, int radius = 3);

namespace serial {

UvAccumulator splat(const Tensor4& view_images, std::span<const ViewBuffers> buffers, int resolution,
                    double temperature = 1.0);

Tensor4 unproject(std::span<const UvAccumulator> levels, std::span<const double> level_weights,
                  std::span<const ViewBuffers> buffers, const Tensor4& fallback);

}  // namespace serial

}  // namespace uvfuse
