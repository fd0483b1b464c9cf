#pragma once

#include <doctest.h>

#include <random>

#include "uvfuse/error.hpp"
#include "uvfuse/image.hpp"

#define CHECK_THROWS_CODE(expr, expected)                      \
  do {                                                         \
    bool caught_ = false;                                      \
    try {                                                      \
      (void)(expr);                                            \
    } catch (const uvfuse::Error& e_) {                        \
      caught_ = true;                                          \
      CHECK(e_.code() == (expected));                          \
    }                                                          \
    CHECK_MESSAGE(caught_, "expected uvfuse::Error");          \
  } while (0)

namespace testing {

inline uvfuse::Tensor4 random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  uvfuse::Tensor4 t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<float>(d(rng));
  return t;
}

}  // namespace testing
