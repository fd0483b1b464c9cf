#include "uvfuse/uvfusion.hpp"

#include <algorithm>
#include <cmath>

#include "uvfuse/error.hpp"
#include "uvfuse/texel.hpp"

namespace uvfuse {

UvAccumulator::UvAccumulator(int res, int ch)
    : resolution(res),
      channels(ch),
      weighted_sum(static_cast<std::size_t>(ch) * res * res, 0.0),
      weight_total(static_cast<std::size_t>(res) * res, 0.0) {}

std::vector<std::uint8_t> UvAccumulator::coverage() const {
  std::vector<std::uint8_t> m(texels());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = covered(i) ? 1 : 0;
  return m;
}

Image UvAccumulator::fused_image(float hole) const {
  Image img(channels, resolution, resolution, hole);
  for (std::size_t i = 0; i < texels(); ++i) {
    if (!covered(i)) continue;
    for (int c = 0; c < channels; ++c) img.data[c * texels() + i] = static_cast<float>(fused(c, i));
  }
  return img;
}

std::size_t FusedTexture::hole_count() const {
  return static_cast<std::size_t>(std::count(hole_mask.begin(), hole_mask.end(), std::uint8_t{1}));
}

ScaleWeights scale_weights(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "progress must lie in [0, 1]");
  constexpr double kTransfer = 0.3;
  constexpr double kFinal512 = 0.6;
  if (p <= kTransfer) {
    const double q = p / kTransfer;
    return {1.0 - q, q, 0.0};
  }
  const double q = (p - kTransfer) / (1.0 - kTransfer);
  const double w512 = kFinal512 * q;
  return {0.0, 1.0 - w512, w512};
}

namespace {

void check_views(const Tensor4& images, std::span<const ViewBuffers> buffers) {
  if (images.views != static_cast<int>(buffers.size())) {
    throw Error(ErrorCode::ShapeMismatch, "one buffer set per view image is required");
  }
  for (const auto& b : buffers) {
    if (b.size != images.height || b.size != images.width) {
      throw Error(ErrorCode::ShapeMismatch, "view images and buffers differ in size");
    }
  }
}

// Sparse per-view partial sums, sorted by texel.
struct ViewPartial {
  std::vector<std::uint32_t> texel;
  std::vector<double> values;  // per entry: channels sums followed by the weight
};

// Dense scratch reused across the views one thread handles.
struct SplatScratch {
  std::vector<double> sums;  // (channels + 1) per texel
  std::vector<std::uint32_t> touched;
  SplatScratch(int res, int ch) : sums(static_cast<std::size_t>(res) * res * (ch + 1), 0.0) {}
};

ViewPartial splat_view(const Tensor4& images, int v, const ViewBuffers& buf, int res, double inv_temp,
                       SplatScratch& scratch) {
  const int ch = images.channels;
  const std::size_t stride = ch + 1;
  scratch.touched.clear();
  const std::size_t plane = images.plane();
  auto img = images.view(v);
  for (std::size_t i = 0; i < buf.pixels(); ++i) {
    if (!buf.mask[i]) continue;
    const auto t = static_cast<std::uint32_t>(nearest_texel(buf.uv[2 * i], buf.uv[2 * i + 1], res));
    double* slot = scratch.sums.data() + t * stride;
    if (slot[ch] == 0.0) scratch.touched.push_back(t);
    const double w = std::exp(buf.score[i] * inv_temp);
    for (int c = 0; c < ch; ++c) slot[c] += w * img[c * plane + i];
    slot[ch] += w;
  }
  std::sort(scratch.touched.begin(), scratch.touched.end());
  ViewPartial out;
  out.texel = scratch.touched;
  out.values.resize(out.texel.size() * stride);
  for (std::size_t k = 0; k < out.texel.size(); ++k) {
    double* slot = scratch.sums.data() + out.texel[k] * stride;
    std::copy(slot, slot + stride, out.values.begin() + k * stride);
    std::fill(slot, slot + stride, 0.0);
  }
  return out;
}

void merge_partial(const ViewPartial& part, UvAccumulator& acc, bool parallel) {
  const int ch = acc.channels;
  const std::size_t stride = ch + 1;
  const std::size_t n = acc.texels();
  const auto count = static_cast<std::ptrdiff_t>(part.texel.size());
#pragma omp parallel for if (parallel)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const std::size_t t = part.texel[k];
    const double* vals = part.values.data() + k * stride;
    for (int c = 0; c < ch; ++c) acc.weighted_sum[c * n + t] += vals[c];
    acc.weight_total[t] += vals[ch];
  }
}

// Bilinear lookup of one filled level at `uv`; false when a tap with nonzero
// weight has no value.
bool sample_level(const FilledLevel& lvl, double u, double v, float* out) {
  const int r = lvl.resolution;
  const Vec2 p = texel_coords(Vec2(u, v), r);
  const double fx = std::clamp(p.x(), 0.0, static_cast<double>(r - 1));
  const double fy = std::clamp(p.y(), 0.0, static_cast<double>(r - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, r - 1);
  const int y1 = std::min(y0 + 1, r - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const std::size_t taps[4] = {static_cast<std::size_t>(y0) * r + x0, static_cast<std::size_t>(y0) * r + x1,
                               static_cast<std::size_t>(y1) * r + x0, static_cast<std::size_t>(y1) * r + x1};
  const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  for (int k = 0; k < 4; ++k) {
    if (w[k] > 0.0 && !lvl.valid[taps[k]]) return false;
  }
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  for (int c = 0; c < lvl.channels; ++c) {
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (w[k] > 0.0) acc += w[k] * lvl.color[c * plane + taps[k]];
    }
    out[c] = static_cast<float>(acc);
  }
  return true;
}

void check_levels(std::span<const UvAccumulator> levels, std::span<const double> weights) {
  if (levels.empty() || levels.size() != weights.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one weight per texture level is required");
  }
}

// Shared per-pixel body of unproject.
void unproject_pixel(std::span<const FilledLevel> filled, std::span<const double> weights,
                     const ViewBuffers& buf, std::size_t i, const Tensor4& fallback, int v, Tensor4& out) {
  const int ch = out.channels;
  const std::size_t plane = out.plane();
  float sample[8];
  double blend[8] = {};
  double wsum = 0.0;
  if (buf.mask[i]) {
    for (std::size_t l = 0; l < filled.size(); ++l) {
      if (weights[l] <= 0.0) continue;
      if (!sample_level(filled[l], buf.uv[2 * i], buf.uv[2 * i + 1], sample)) continue;
      for (int c = 0; c < ch; ++c) blend[c] += weights[l] * sample[c];
      wsum += weights[l];
    }
  }
  auto dst = out.view(v);
  auto src = fallback.view(v);
  for (int c = 0; c < ch; ++c) {
    dst[c * plane + i] = wsum > 0.0 ? static_cast<float>(blend[c] / wsum) : src[c * plane + i];
  }
}

std::vector<FilledLevel> fill_levels(std::span<const UvAccumulator> levels, std::span<const double> weights) {
  std::vector<FilledLevel> filled(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (weights[l] > 0.0) filled[l] = fill_from_neighbors(levels[l]);
  }
  return filled;
}

void check_unproject(std::span<const UvAccumulator> levels, std::span<const double> weights,
                     std::span<const ViewBuffers> buffers, const Tensor4& fallback) {
  check_levels(levels, weights);
  check_views(fallback, buffers);
  for (const auto& l : levels) {
    if (l.channels != fallback.channels || l.channels > 8) {
      throw Error(ErrorCode::ShapeMismatch, "texture and image channels differ");
    }
  }
}

}  // namespace

FilledLevel fill_from_neighbors(const UvAccumulator& level, int radius) {
  const int r = level.resolution;
  FilledLevel out;
  out.resolution = r;
  out.channels = level.channels;
  out.color.assign(level.weighted_sum.size(), 0.0f);
  out.valid.assign(level.texels(), 0);

  // Offsets inside the radius ordered by distance, then row-major.
  std::vector<std::array<int, 3>> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int d2 = dx * dx + dy * dy;
      if (d2 > 0 && d2 <= radius * radius) offsets.push_back({d2, dy, dx});
    }
  }
  std::sort(offsets.begin(), offsets.end());

  const std::size_t n = level.texels();
#pragma omp parallel for
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      std::size_t src = static_cast<std::size_t>(y) * r + x;
      bool found = level.covered(src);
      for (std::size_t k = 0; !found && k < offsets.size(); ++k) {
        const int yy = y + offsets[k][1];
        const int xx = x + offsets[k][2];
        if (xx < 0 || yy < 0 || xx >= r || yy >= r) continue;
        const std::size_t cand = static_cast<std::size_t>(yy) * r + xx;
        if (level.covered(cand)) {
          src = cand;
          found = true;
        }
      }
      if (!found) continue;
      const std::size_t dst = static_cast<std::size_t>(y) * r + x;
      out.valid[dst] = 1;
      for (int c = 0; c < level.channels; ++c) out.color[c * n + dst] = static_cast<float>(level.fused(c, src));
    }
  }
  return out;
}

namespace serial {

UvAccumulator splat(const Tensor4& images, std::span<const ViewBuffers> buffers, int resolution,
                    double temperature) {
  check_views(images, buffers);
  UvAccumulator acc(resolution, images.channels);
  SplatScratch scratch(resolution, images.channels);
  for (int v = 0; v < images.views; ++v) {
    merge_partial(splat_view(images, v, buffers[v], resolution, 1.0 / temperature, scratch), acc, false);
  }
  return acc;
}

Tensor4 unproject(std::span<const UvAccumulator> levels, std::span<const double> weights,
                  std::span<const ViewBuffers> buffers, const Tensor4& fallback) {
  check_unproject(levels, weights, buffers, fallback);
  const auto filled = fill_levels(levels, weights);
  Tensor4 out(fallback.views, fallback.channels, fallback.height, fallback.width);
  for (int v = 0; v < fallback.views; ++v) {
    for (std::size_t i = 0; i < buffers[v].pixels(); ++i) unproject_pixel(filled, weights, buffers[v], i, fallback, v, out);
  }
  return out;
}

}  // namespace serial

UvAccumulator splat(const Tensor4& images, std::span<const ViewBuffers> buffers, int resolution,
                    double temperature) {
  check_views(images, buffers);
  std::vector<ViewPartial> partials(images.views);
#pragma omp parallel
  {
    SplatScratch scratch(resolution, images.channels);
#pragma omp for schedule(dynamic)
    for (int v = 0; v < images.views; ++v) {
      partials[v] = splat_view(images, v, buffers[v], resolution, 1.0 / temperature, scratch);
    }
  }
  UvAccumulator acc(resolution, images.channels);
  for (const auto& part : partials) merge_partial(part, acc, true);
  return acc;
}

Tensor4 unproject(std::span<const UvAccumulator> levels, std::span<const double> weights,
                  std::span<const ViewBuffers> buffers, const Tensor4& fallback) {
  check_unproject(levels, weights, buffers, fallback);
  const auto filled = fill_levels(levels, weights);
  Tensor4 out(fallback.views, fallback.channels, fallback.height, fallback.width);
  const auto pixels = static_cast<std::ptrdiff_t>(fallback.plane());
#pragma omp parallel for collapse(2) schedule(static)
  for (int v = 0; v < fallback.views; ++v) {
    for (std::ptrdiff_t i = 0; i < pixels; ++i) unproject_pixel(filled, weights, buffers[v], i, fallback, v, out);
  }
  return out;
}

FusedTexture fused_texture(std::span<const UvAccumulator> levels, std::span<const double> weights,
                           float hole) {
  check_levels(levels, weights);
  const auto finest = std::max_element(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
    return a.resolution < b.resolution;
  });
  const int r = finest->resolution;
  const int ch = finest->channels;
  FusedTexture out{Image(ch, r, r, hole), std::vector<std::uint8_t>(static_cast<std::size_t>(r) * r, 1)};

#pragma omp parallel for
  for (int y = 0; y < r; ++y) {
    double value[8];
    double blend[8];
    for (int x = 0; x < r; ++x) {
      const Vec2 uv = texel_center_uv(x, y, r);
      double wsum = 0.0;
      double zero_wsum = 0.0;  // levels available only with zero weight
      double zero_blend[8] = {};
      std::fill(blend, blend + ch, 0.0);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto& lvl = levels[l];
        const int lr = lvl.resolution;
        const std::size_t home = static_cast<std::size_t>(nearest_texel(uv.x(), uv.y(), lr));
        if (!lvl.covered(home)) continue;
        if (lr == r) {
          for (int c = 0; c < ch; ++c) value[c] = lvl.fused(c, home);
        } else {
          // Coverage-masked bilinear upsample.
          const Vec2 p = texel_coords(uv, lr);
          const double fx = std::clamp(p.x(), 0.0, static_cast<double>(lr - 1));
          const double fy = std::clamp(p.y(), 0.0, static_cast<double>(lr - 1));
          const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
          const int x1 = std::min(x0 + 1, lr - 1), y1 = std::min(y0 + 1, lr - 1);
          const double ax = fx - x0, ay = fy - y0;
          const std::size_t taps[4] = {static_cast<std::size_t>(y0) * lr + x0, static_cast<std::size_t>(y0) * lr + x1,
                                       static_cast<std::size_t>(y1) * lr + x0, static_cast<std::size_t>(y1) * lr + x1};
          const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
          double tw = 0.0;
          std::fill(value, value + ch, 0.0);
          for (int k = 0; k < 4; ++k) {
            if (w[k] <= 0.0 || !lvl.covered(taps[k])) continue;
            tw += w[k];
            for (int c = 0; c < ch; ++c) value[c] += w[k] * lvl.fused(c, taps[k]);
          }
          for (int c = 0; c < ch; ++c) value[c] /= tw;
        }
        if (weights[l] > 0.0) {
          for (int c = 0; c < ch; ++c) blend[c] += weights[l] * value[c];
          wsum += weights[l];
        } else {
          for (int c = 0; c < ch; ++c) zero_blend[c] += value[c];
          zero_wsum += 1.0;
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * r + x;
      if (wsum == 0.0 && zero_wsum == 0.0) continue;
      out.hole_mask[i] = 0;
      for (int c = 0; c < ch; ++c) {
        const double v = wsum > 0.0 ? blend[c] / wsum : zero_blend[c] / zero_wsum;
        out.texture.data[c * out.texture.plane() + i] = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace uvfuse
