#include "uvfuse/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "uvfuse/error.hpp"

namespace uvfuse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::MissingUv: return "missing-UV error";
    case ErrorCode::DegenerateMesh: return "degenerate-mesh error";
    case ErrorCode::InvalidRadius: return "invalid-radius error";
    case ErrorCode::EmptyInput: return "empty-input error";
    case ErrorCode::InvalidRange: return "invalid-range error";
    case ErrorCode::OutOfRange: return "out-of-range error";
    case ErrorCode::ShapeMismatch: return "shape-mismatch error";
    case ErrorCode::Transport: return "transport error";
    case ErrorCode::OracleUnset: return "oracle-unset error";
    case ErrorCode::AllInvalid: return "all-invalid error";
    case ErrorCode::HolesPresent: return "holes-present error";
    case ErrorCode::Io: return "io error";
  }
  return "error";
}

Image Tensor4::image(int v) const {
  Image img(channels, height, width);
  auto src = view(v);
  std::copy(src.begin(), src.end(), img.data.begin());
  return img;
}

void Tensor4::set_image(int v, const Image& img) {
  if (img.channels != channels || img.height != height || img.width != width) {
    throw Error(ErrorCode::ShapeMismatch, "image does not match tensor view shape");
  }
  std::copy(img.data.begin(), img.data.end(), view(v).begin());
}

std::uint8_t to_byte(float signed_unit) {
  const float v = std::clamp((signed_unit + 1.0f) * 0.5f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

namespace {

void write_png(const std::string& path, const void* buffer, png_uint_32 w, png_uint_32 h,
               png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = w;
  image.height = h;
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer, 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot write " + path + ": " + msg);
  }
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
  const int c = img.channels;
  if (c != 1 && c != 3 && c != 4) {
    throw Error(ErrorCode::ShapeMismatch, "PNG export needs 1, 3 or 4 channels");
  }
  std::vector<std::uint8_t> px(img.plane() * c);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int k = 0; k < c; ++k) {
        px[(static_cast<std::size_t>(y) * img.width + x) * c + k] = to_byte(img.at(k, y, x));
      }
    }
  }
  const png_uint_32 format =
      c == 1 ? PNG_FORMAT_GRAY : (c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA);
  write_png(path, px.data(), img.width, img.height, format);
}

void write_png_gray16(const std::string& path, const Image& img) {
  std::vector<std::uint16_t> px(img.plane());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    px[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
  }
  write_png(path, px.data(), img.width, img.height, PNG_FORMAT_LINEAR_Y);
}

void write_png_gray8(const std::string& path, const Image& img) {
  std::vector<std::uint8_t> px(img.plane());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  write_png(path, px.data(), img.width, img.height, PNG_FORMAT_GRAY);
}

Image read_png_rgb(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::Io, "cannot read " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode " + path + ": " + msg);
  }
  Image img(3, static_cast<int>(image.height), static_cast<int>(image.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int k = 0; k < 3; ++k) {
        const auto b = px[(static_cast<std::size_t>(y) * img.width + x) * 3 + k];
        img.at(k, y, x) = static_cast<float>(b) / 255.0f * 2.0f - 1.0f;
      }
    }
  }
  return img;
}

double psnr(const Image& a, const Image& b, std::span<const std::uint8_t> mask) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::ShapeMismatch, "psnr operands differ in shape");
  }
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.plane(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = static_cast<double>(a.data[c * a.plane() + i]) - b.data[c * b.plane() + i];
      se += d * d;
    }
    n += a.channels;
  }
  if (n == 0) return 0.0;
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(4.0 / mse);
}

}  // namespace uvfuse
