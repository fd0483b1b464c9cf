#include "uvfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "uvfuse/error.hpp"
#include "uvfuse/inpaint.hpp"
#include "uvfuse/primitives.hpp"
#include "uvfuse/scheduler.hpp"
#include "uvfuse/texel.hpp"
#include "uvfuse/uvfusion.hpp"

namespace uvfuse {

namespace fs = std::filesystem;

void GenerationConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidRange, what); };
  if (n_views < 1) fail("n_views must be at least 1");
  if (steps < 1) fail("steps must be at least 1");
  if (!(truncation > 0.0 && truncation <= 1.0)) fail("truncation must lie in (0, 1]");
  if (resolutions.size() != 3) fail("exactly three texture resolutions are required");
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    if (resolutions[i] < 1 || (i > 0 && resolutions[i] <= resolutions[i - 1])) {
      fail("resolutions must be positive and strictly increasing");
    }
  }
  if (image_size < 1) fail("image_size must be positive");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (mock_latent < 0 || prior_spread < 0.0 || perturbation < 0.0) fail("mock parameters must be non-negative");
}

nlohmann::json GenerationReport::to_json() const {
  nlohmann::json j;
  j["texture_path"] = texture_path;
  j["holes_before_inpaint"] = holes_before_inpaint;
  j["holes_after_inpaint"] = holes_after_inpaint;
  j["step_seconds"] = step_seconds;
  j["total_seconds"] = total_seconds;
  j["consistency_metric"] = std::isfinite(consistency) ? nlohmann::json(consistency) : nlohmann::json();
  j["pre_fusion_consistency_metric"] = pre_fusion_consistency;
  j["coverage_fraction"] = coverage_fraction;
  j["last_timestep"] = last_timestep;
  j["denoiser_calls_per_view"] = denoiser_calls_per_view;
  j["psnr_vs_ground_truth"] = psnr_vs_gt ? nlohmann::json(*psnr_vs_gt) : nlohmann::json();
  j["step_psnr"] = step_psnr;
  j["z0_trajectory_variance"] = z0_trajectory_variance;
  return j;
}

Scene prepare_scene(TexturedMesh mesh, const GenerationConfig& config) {
  config.validate();
  Scene scene;
  scene.mesh = std::move(mesh);
  if (config.rig_mode == RigMode::Select) {
    scene.rig = select_views(scene.mesh, config.n_views, RigDefaults::kRadius, RigDefaults::kFovY,
                             config.image_size, config.seed);
  } else {
    scene.rig = default_rig(config.n_views, RigDefaults::kRadius, RigDefaults::kFovY, config.image_size);
  }
  scene.buffers = rasterize_rig(scene.mesh, scene.rig);
  return scene;
}

Image default_ground_truth(int resolution) {
  return make_checkerboard(resolution, 8, Vec3(0.8, -0.5, -0.3), Vec3(-0.6, 0.4, 0.7), resolution / 64.0);
}

MockOracleDenoiser make_mock_denoiser(const Scene& scene, const GenerationConfig& config,
                                      const Image& ground_truth) {
  MockOptions opt;
  const int side = config.mock_latent == 0 ? config.image_size : config.mock_latent;
  opt.latent = {3, side, side};
  opt.image_size = config.image_size;
  opt.prior_spread = config.prior_spread;
  MockOracleDenoiser mock(make_schedule(), opt);
  OracleTarget target = make_oracle_target(ground_truth, scene.buffers);
  if (config.perturbation > 0.0) {
    target.perturbations = make_view_perturbations(scene.buffers, config.perturbation, config.seed);
  }
  mock.set_oracle(std::move(target));
  return mock;
}

namespace {

// Texels inside the UV atlas that are not holes.
double coverage_fraction(const TexturedMesh& mesh, std::span<const std::uint8_t> holes, int resolution) {
  const auto atlas = atlas_mask(mesh, resolution);
  std::size_t inside = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < atlas.size(); ++i) {
    if (!atlas[i]) continue;
    ++inside;
    covered += holes[i] ? 0 : 1;
  }
  return inside == 0 ? 0.0 : static_cast<double>(covered) / inside;
}

std::vector<std::uint8_t> scored_mask(const TexturedMesh& mesh, std::span<const std::uint8_t> holes,
                                      int resolution) {
  auto mask = atlas_mask(mesh, resolution);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && !holes[i];
  return mask;
}

Image hole_image(std::span<const std::uint8_t> holes, int resolution) {
  Image img(1, resolution, resolution);
  for (std::size_t i = 0; i < holes.size(); ++i) img.data[i] = holes[i] ? 1.0f : 0.0f;
  return img;
}

std::string step_name(int i, const char* what) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%02d_%s.png", i, what);
  return buf;
}

}  // namespace

GenerationResult generate(const Scene& scene, Denoiser& denoiser, const GenerationConfig& config,
                          const Image* ground_truth) {
  config.validate();
  const auto total_start = std::chrono::steady_clock::now();
  const NoiseSchedule& sched = denoiser.schedule();
  const LatentShape ls = denoiser.latent_shape();
  const int n = static_cast<int>(scene.buffers.size());
  if (n == 0) throw Error(ErrorCode::EmptyInput, "no views");
  if (denoiser.image_size() != scene.buffers.front().size) {
    throw Error(ErrorCode::ShapeMismatch, "denoiser image size differs from the rig");
  }
  const auto timesteps = subsample_timesteps(sched, config.steps, config.truncation);
  const int finest = config.resolutions.back();

  std::vector<ConditionImages> conditions;
  conditions.reserve(n);
  for (const auto& b : scene.buffers) conditions.push_back(make_condition_images(b));
  denoiser.set_conditions(std::move(conditions));

  Tensor4 z(n, ls.channels, ls.height, ls.width);
  for (int v = 0; v < n; ++v) {
    auto rng = view_stream(config.seed, v, 0);
    fill_standard_normal(rng, z.view(v));
  }
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);

  // Running per-element moments of z0' across steps.
  std::vector<double> z0_mean(z.data.size(), 0.0);
  std::vector<double> z0_m2(z.data.size(), 0.0);

  GenerationResult result;
  GenerationReport& rep = result.report;
  FusedTexture final_fused;
  const int steps = static_cast<int>(timesteps.size());
  for (int i = 0; i < steps; ++i) {
    const auto step_start = std::chrono::steady_clock::now();
    const int t = timesteps[i];
    const Tensor4 eps = denoiser.predict_noise(z, t, ids);
    Tensor4 z0(z.views, z.channels, z.height, z.width);
    predict_z0<float>(z.data, eps.data, t, sched, z0.data);
    const Tensor4 x0 = denoiser.decode(z0);

    const double progress = steps == 1 ? 1.0 : static_cast<double>(i) / (steps - 1);
    const auto w = scale_weights(progress).as_array();
    std::vector<UvAccumulator> levels;
    levels.reserve(3);
    for (int l = 0; l < 3; ++l) {
      levels.push_back(w[l] > 0.0 ? splat(x0, scene.buffers, config.resolutions[l], config.temperature)
                                  : UvAccumulator(config.resolutions[l], x0.channels));
    }
    const Tensor4 md = unproject(levels, w, scene.buffers, x0);
    const Tensor4 z0p = denoiser.encode(md);

    for (std::size_t k = 0; k < z0p.data.size(); ++k) {
      const double d = z0p.data[k] - z0_mean[k];
      z0_mean[k] += d / (i + 1);
      z0_m2[k] += d * (z0p.data[k] - z0_mean[k]);
    }

    const bool last = i + 1 == steps;
    if (last || ground_truth || config.debug) {
      FusedTexture fused = fused_texture(levels, w, config.inpaint_background);
      if (ground_truth) {
        rep.step_psnr.push_back(psnr(fused.texture, *ground_truth, scored_mask(scene.mesh, fused.hole_mask, finest)));
      }
      if (config.debug) {
        const fs::path dir = fs::path(config.out_dir) / "debug";
        fs::create_directories(dir);
        write_png_rgb8((dir / step_name(i, "texture")).string(), fused.texture);
        write_png_gray8((dir / step_name(i, "holes")).string(), hole_image(fused.hole_mask, finest));
      }
      if (last) {
        final_fused = std::move(fused);
        result.last_views = x0;
      }
    }

    if (!last) {
      const int t_prev = timesteps[i + 1];
      if (config.step_mode == StepMode::Modified) {
        Tensor4 next(z.views, z.channels, z.height, z.width);
        modified_step<float>(z.data, z0p.data, t, t_prev, sched, next.data);
        z = std::move(next);
      } else {
        for (int v = 0; v < n; ++v) {
          auto rng = view_stream(config.seed, v, static_cast<std::uint64_t>(i) + 1);
          naive_step<float>(z0p.view(v), t_prev, sched, rng, z.view(v));
        }
      }
    }
    rep.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - step_start).count());
  }

  double m2 = 0.0;
  for (double v : z0_m2) m2 += v;
  rep.z0_trajectory_variance = steps > 1 ? m2 / (static_cast<double>(z0_m2.size()) * (steps - 1)) : 0.0;

  result.fused = final_fused.texture;
  result.hole_mask = final_fused.hole_mask;
  rep.holes_before_inpaint = final_fused.hole_count();
  rep.coverage_fraction = coverage_fraction(scene.mesh, final_fused.hole_mask, finest);

  std::vector<std::uint8_t> valid(final_fused.hole_mask.size());
  for (std::size_t k = 0; k < valid.size(); ++k) valid[k] = final_fused.hole_mask[k] ? 0 : 1;
  result.texture = fill_holes(MaskedTexture{final_fused.texture, valid}, config.inpaint_background);

  // Texels still holes after inpainting are those no covered texel reaches.
  std::vector<std::uint8_t> remaining(valid.size(), 0);
  {
    Image probe(1, finest, finest);
    for (std::size_t k = 0; k < valid.size(); ++k) probe.data[k] = valid[k] ? 1.0f : 0.0f;
    const Image reach = fill_holes(MaskedTexture{probe, valid}, -1.0f);
    for (std::size_t k = 0; k < valid.size(); ++k) remaining[k] = reach.data[k] < 0.0f ? 1 : 0;
  }
  rep.holes_after_inpaint = static_cast<std::size_t>(std::count(remaining.begin(), remaining.end(), 1));

  rep.pre_fusion_consistency = cross_view_discrepancy(result.last_views, scene.buffers, finest);
  rep.consistency = rep.holes_after_inpaint == 0
                        ? consistency_metric(result.texture, remaining, scene.buffers)
                        : std::numeric_limits<double>::quiet_NaN();
  rep.last_timestep = timesteps.back();
  rep.denoiser_calls_per_view = denoiser.noise_calls() / static_cast<std::uint64_t>(n);
  if (ground_truth) {
    rep.psnr_vs_gt = psnr(result.fused, *ground_truth, scored_mask(scene.mesh, result.hole_mask, finest));
  }
  rep.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - total_start).count();
  return result;
}

double cross_view_discrepancy(const Tensor4& images, std::span<const ViewBuffers> buffers, int resolution) {
  const int n = images.views;
  if (n != static_cast<int>(buffers.size())) throw Error(ErrorCode::ShapeMismatch, "one buffer set per view");
  if (n < 2) return 0.0;
  const std::size_t texels = static_cast<std::size_t>(resolution) * resolution;
  const int ch = images.channels;

  // Per-view plain average into its own UV grid.
  std::vector<std::vector<float>> grids(n);
  std::vector<std::vector<std::uint8_t>> seen(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    std::vector<double> sum(texels * ch, 0.0);
    std::vector<int> count(texels, 0);
    const auto& b = buffers[v];
    auto img = images.view(v);
    for (std::size_t p = 0; p < b.pixels(); ++p) {
      if (!b.mask[p]) continue;
      const auto t = static_cast<std::size_t>(nearest_texel(b.uv[2 * p], b.uv[2 * p + 1], resolution));
      ++count[t];
      for (int c = 0; c < ch; ++c) sum[c * texels + t] += img[c * images.plane() + p];
    }
    grids[v].assign(texels * ch, 0.0f);
    seen[v].assign(texels, 0);
    for (std::size_t t = 0; t < texels; ++t) {
      if (count[t] == 0) continue;
      seen[v][t] = 1;
      for (int c = 0; c < ch; ++c) grids[v][c * texels + t] = static_cast<float>(sum[c * texels + t] / count[t]);
    }
  }

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  }
  std::vector<double> pair_error(pairs.size(), 0.0);
  std::vector<std::uint8_t> pair_valid(pairs.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    double err = 0.0;
    std::size_t shared = 0;
    for (std::size_t t = 0; t < texels; ++t) {
      if (!seen[a][t] || !seen[b][t]) continue;
      ++shared;
      double d = 0.0;
      for (int c = 0; c < ch; ++c) d += std::abs(grids[a][c * texels + t] - grids[b][c * texels + t]);
      err += d / ch;
    }
    if (shared > 0) {
      pair_error[k] = err / shared;
      pair_valid[k] = 1;
    }
  }
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!pair_valid[k]) continue;
    total += pair_error[k];
    ++used;
  }
  return used == 0 ? 0.0 : total / used;
}

double consistency_metric(const Image& texture, std::span<const std::uint8_t> hole_mask,
                          std::span<const ViewBuffers> buffers) {
  for (auto h : hole_mask) {
    if (h) throw Error(ErrorCode::HolesPresent, "consistency needs a hole-free texture");
  }
  if (buffers.empty()) return 0.0;
  const int s = buffers.front().size;
  Tensor4 renders(static_cast<int>(buffers.size()), texture.channels, s, s);
  for (std::size_t v = 0; v < buffers.size(); ++v) {
    renders.set_image(static_cast<int>(v), render_texture(texture, buffers[v]));
  }
  return cross_view_discrepancy(renders, buffers, texture.width);
}

void write_turntable(const TexturedMesh& mesh, const Image& texture, const std::string& dir, int image_size) {
  fs::create_directories(dir);
  const ViewRig rig = default_rig(36, RigDefaults::kRadius, RigDefaults::kFovY, image_size);
  const auto buffers = rasterize_rig(mesh, rig);
  for (std::size_t v = 0; v < buffers.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%02zu.png", v);
    write_png_rgb8((fs::path(dir) / name).string(), render_texture(texture, buffers[v]));
  }
}

GenerationReport run_generation(const GenerationConfig& config) {
  config.validate();
  TexturedMesh mesh = load_mesh(config.mesh_path);
  const Scene scene = prepare_scene(std::move(mesh), config);
  const int finest = config.resolutions.back();

  GenerationResult result;
  if (config.denoiser == DenoiserMode::Mock) {
    Image gt = config.oracle_texture.empty() ? default_ground_truth(finest) : read_png_rgb(config.oracle_texture);
    if (gt.width != finest || gt.height != finest) {
      throw Error(ErrorCode::ShapeMismatch, "oracle texture must match the finest resolution");
    }
    MockOracleDenoiser mock = make_mock_denoiser(scene, config, gt);
    result = generate(scene, mock, config, &gt);
  } else {
    RemoteOptions opt;
    opt.url = config.service_url;
    opt.prompt = config.prompt;
    opt.image_size = config.image_size;
    opt.n_views = static_cast<int>(scene.buffers.size());
    opt.seed = config.seed;
    RemoteDenoiser remote(opt);
    result = generate(scene, remote, config);
  }

  const fs::path out(config.out_dir);
  fs::create_directories(out);
  GenerationReport rep = result.report;
  rep.texture_path = (out / "texture.png").string();
  write_png_rgb8(rep.texture_path, result.texture);
  write_png_gray8((out / "texture_hole_mask.png").string(), hole_image(result.hole_mask, finest));
  write_turntable(scene.mesh, result.texture, (out / "turntable").string(), config.image_size);

  std::ofstream json(out / "report.json");
  json << rep.to_json().dump(2) << '\n';
  if (!json) throw Error(ErrorCode::Io, "cannot write report.json");
  return rep;
}

}  // namespace uvfuse
