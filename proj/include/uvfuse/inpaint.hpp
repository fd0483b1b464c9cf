#pragma once

#include <cstdint>
#include <vector>

#include "uvfuse/image.hpp"

namespace uvfuse {

struct MaskedTexture {
  Image texture;
  std::vector<std::uint8_t> valid;  // height x width, nonzero = valid
};

/// Mask-aware hole filling. Each pass sets every invalid texel that has at
/// least one valid 8-neighbor to the mean of those neighbors (all fills of a
/// pass read the previous pass), then marks it valid. Passes repeat until
/// nothing changes. Valid texels are copied bit-exactly; texels unreachable
/// from any valid texel get `background`. Throws AllInvalid.
Image fill_holes(const MaskedTexture& input, float background = 0.0f);

namespace serial {
Image fill_holes(const MaskedTexture& input, float background = 0.0f);
}

}  // namespace uvfuse
