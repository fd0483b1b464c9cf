// Serial reference vs. OpenMP kernels on the default 36-view cube rig.
// Usage: uvfuse_bench [image_size] [repeats]
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "uvfuse/inpaint.hpp"
#include "uvfuse/primitives.hpp"
#include "uvfuse/raster.hpp"
#include "uvfuse/uvfusion.hpp"

using namespace uvfuse;

namespace {

double best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, int repeats, const std::function<void()>& serial_fn, const std::function<void()>& par_fn) {
  const double s = best_of(repeats, serial_fn);
  const double p = best_of(repeats, par_fn);
  std::printf("%-12s %10.2f %10.2f %8.2fx\n", name, s * 1e3, p * 1e3, s / p);
}

}  // namespace

int main(int argc, char** argv) {
  const int size = argc > 1 ? std::atoi(argv[1]) : 256;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  const TexturedMesh mesh = make_uv_sphere(32, 64);
  const ViewRig rig = default_rig(36, RigDefaults::kRadius, RigDefaults::kFovY, size);
  const auto buffers = rasterize_rig(mesh, rig);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor4 images(36, 3, size, size);
  for (float& v : images.data) v = u(rng);
  const std::vector<UvAccumulator> levels{splat(images, buffers, size / 4), splat(images, buffers, size / 2),
                                          splat(images, buffers, size)};
  const std::array<double, 3> weights{0.2, 0.4, 0.4};

  MaskedTexture holes{Image(3, size, size), std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size)};
  for (float& v : holes.texture.data) v = u(rng);
  std::bernoulli_distribution keep(0.02);
  for (auto& v : holes.valid) v = keep(rng) ? 1 : 0;
  holes.valid[0] = 1;

  std::printf("threads %d, views 36, image %d^2, best of %d\n", omp_get_max_threads(), size, repeats);
  std::printf("%-12s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  row("rasterize", repeats,
      [&] {
        for (const auto& p : rig.poses) (void)serial::rasterize(mesh, p);
      },
      [&] {
        for (const auto& p : rig.poses) (void)rasterize(mesh, p);
      });
  row("splat", repeats, [&] { (void)serial::splat(images, buffers, size); },
      [&] { (void)splat(images, buffers, size); });
  row("unproject", repeats, [&] { (void)serial::unproject(levels, weights, buffers, images); },
      [&] { (void)unproject(levels, weights, buffers, images); });
  row("fill_holes", repeats, [&] { (void)serial::fill_holes(holes); }, [&] { (void)fill_holes(holes); });
  return 0;
}
