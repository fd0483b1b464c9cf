#include "uvfuse/inpaint.hpp"

#include <algorithm>

#include "uvfuse/error.hpp"

namespace uvfuse {

namespace {

void check_input(const MaskedTexture& in) {
  if (in.valid.size() != in.texture.plane()) {
    throw Error(ErrorCode::ShapeMismatch, "mask and texture differ in size");
  }
  if (std::none_of(in.valid.begin(), in.valid.end(), [](std::uint8_t v) { return v != 0; })) {
    throw Error(ErrorCode::AllInvalid, "no valid texel to fill from");
  }
}

// One texel of one pass; returns true when it was filled.
bool fill_texel(const Image& src, const std::vector<std::uint8_t>& valid, int y, int x, Image& dst,
                std::vector<std::uint8_t>& next_valid) {
  const int h = src.height;
  const int w = src.width;
  const std::size_t i = static_cast<std::size_t>(y) * w + x;
  if (valid[i]) return false;
  double sum[16] = {};
  int count = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int yy = y + dy;
      const int xx = x + dx;
      if ((dy == 0 && dx == 0) || yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
      const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
      if (!valid[j]) continue;
      ++count;
      for (int c = 0; c < src.channels; ++c) sum[c] += src.data[c * src.plane() + j];
    }
  }
  if (count == 0) return false;
  for (int c = 0; c < src.channels; ++c) dst.data[c * src.plane() + i] = static_cast<float>(sum[c] / count);
  next_valid[i] = 1;
  return true;
}

template <bool Parallel>
Image fill_impl(const MaskedTexture& in, float background) {
  check_input(in);
  if (in.texture.channels > 16) throw Error(ErrorCode::ShapeMismatch, "at most 16 channels");
  Image cur = in.texture;
  std::vector<std::uint8_t> valid(in.valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = in.valid[i] ? 1 : 0;

  const int h = cur.height;
  const int w = cur.width;
  for (;;) {
    Image next = cur;
    std::vector<std::uint8_t> next_valid = valid;
    long filled = 0;
#pragma omp parallel for reduction(+ : filled) if (Parallel)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) filled += fill_texel(cur, valid, y, x, next, next_valid) ? 1 : 0;
    }
    if (filled == 0) break;
    cur = std::move(next);
    valid = std::move(next_valid);
  }
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) continue;
    for (int c = 0; c < cur.channels; ++c) cur.data[c * cur.plane() + i] = background;
  }
  return cur;
}

}  // namespace

Image fill_holes(const MaskedTexture& input, float background) { return fill_impl<true>(input, background); }

namespace serial {
Image fill_holes(const MaskedTexture& input, float background) { return fill_impl<false>(input, background); }
}  // namespace serial

}  // namespace uvfuse
