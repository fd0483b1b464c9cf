#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace uvfuse {

/// Planar (channels-first, row-major) float image. Colors are kept in [-1, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
};

/// Stack of same-shaped planar images, one per view: [views, channels, height, width].
/// This is also the wire layout of tensors exchanged with the denoiser service.
struct Tensor4 {
  int views = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, float fill = 0.0f)
      : views(n), channels(c), height(h), width(w),
        data(static_cast<std::size_t>(n) * c * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t view_size() const { return channels * plane(); }
  bool same_shape(const Tensor4& o) const {
    return views == o.views && channels == o.channels && height == o.height && width == o.width;
  }

  std::span<float> view(int v) { return {data.data() + v * view_size(), view_size()}; }
  std::span<const float> view(int v) const { return {data.data() + v * view_size(), view_size()}; }

  float& at(int v, int c, int y, int x) {
    return data[v * view_size() + c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  float at(int v, int c, int y, int x) const {
    return data[v * view_size() + c * plane() + static_cast<std::size_t>(y) * width + x];
  }

  Image image(int v) const;
  void set_image(int v, const Image& img);
};

// PNG I/O. 8-bit images map [-1, 1] to [0, 255]; 1, 3 or 4 channels.
void write_png_rgb8(const std::string& path, const Image& img);
// Writes a single-channel image with values in [0, 1] as 16-bit grayscale.
void write_png_gray16(const std::string& path, const Image& img);
// Writes a single-channel image with values in [0, 1] as 8-bit grayscale.
void write_png_gray8(const std::string& path, const Image& img);
// Reads an 8-bit PNG as RGB in [-1, 1].
Image read_png_rgb(const std::string& path);

std::uint8_t to_byte(float signed_unit);

/// Peak signal-to-noise ratio in dB for images in [-1, 1] (peak-to-peak 2),
/// over texels where `mask` is non-zero (all texels when empty).
double psnr(const Image& a, const Image& b, std::span<const std::uint8_t> mask = {});

}  // namespace uvfuse
