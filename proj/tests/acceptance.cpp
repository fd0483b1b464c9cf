// Acceptance run: one PASS/FAIL line per headline criterion. Exit status is
// non-zero when any criterion fails.
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "uvfuse/cameras.hpp"
#include "uvfuse/inpaint.hpp"
#include "uvfuse/pipeline.hpp"
#include "uvfuse/primitives.hpp"
#include "uvfuse/scheduler.hpp"
#include "uvfuse/uvfusion.hpp"

using namespace uvfuse;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome scheduler_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  const NoiseSchedule s = make_schedule();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> tt(1, s.total_steps);
  double worst_eps = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double zt = g(rng), e = g(rng);
    const int t = tt(rng);
    double z0 = 0.0, back = 0.0;
    predict_z0<double>(std::span(&zt, 1), std::span(&e, 1), t, s, std::span(&z0, 1));
    guided_noise<double>(std::span(&zt, 1), std::span(&z0, 1), t, s, std::span(&back, 1));
    worst_eps = std::max(worst_eps, std::abs(back - e));
  }
  double worst_norm = 0.0;
  for (int t = 0; t <= s.total_steps; ++t) {
    worst_norm = std::max(worst_norm, std::abs(s.alpha_at(t) * s.alpha_at(t) + s.sigma_at(t) * s.sigma_at(t) - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst_eps <= 1e-6 && worst_norm <= 1e-9 && secs < 1.0,
          fmt("max |eps' - eps| = %.2e, max |a^2+s^2-1| = %.2e, %.3f s", worst_eps, worst_norm, secs)};
}

Outcome truncation_constants(int oracle_last_timestep) {
  const NoiseSchedule s = make_schedule();
  const auto ts = subsample_timesteps(s, 20, 0.7);
  const bool ok = s.total_steps == 1000 && ts.size() == 20 && ts.front() == 1000 && ts.back() == 300 &&
                  oracle_last_timestep == 300;
  return {ok, fmt("T = %d, %zu steps, first %d, last %d, end-to-end run last %d", s.total_steps, ts.size(),
                  ts.front(), ts.back(), oracle_last_timestep)};
}

Outcome scale_schedule() {
  auto exact = [](ScaleWeights w, double a, double b, double c) { return w.w128 == a && w.w256 == b && w.w512 == c; };
  const bool ends = exact(scale_weights(0.0), 1, 0, 0) && exact(scale_weights(0.3), 0, 1, 0) &&
                    exact(scale_weights(1.0), 0, 0.4, 0.6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto w = scale_weights(u(rng));
    worst = std::max(worst, std::abs(w.w128 + w.w256 + w.w512 - 1.0));
  }
  return {ends && worst <= 1e-12, fmt("endpoints exact: %s, max |sum - 1| over 1e4 draws = %.1e", ends ? "yes" : "no", worst)};
}

Outcome softmax_fusion() {
  // 100 x 100 texels; texel t receives one pixel from each of views 0..k_t-1.
  const int n = 100, views = 8;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kd(2, 8);
  std::vector<int> k(n * n);
  for (int& v : k) v = kd(rng);
  std::vector<ViewBuffers> bufs(views, ViewBuffers(n));
  Tensor4 img(views, 3, n, n);
  for (int v = 0; v < views; ++v) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        auto& b = bufs[v];
        b.mask[i] = v < k[i] ? 1 : 0;
        b.uv[2 * i] = static_cast<float>((x + 0.5) / n);
        b.uv[2 * i + 1] = static_cast<float>(1.0 - (y + 0.5) / n);
        b.score[i] = static_cast<float>(u(rng));
        for (int c = 0; c < 3; ++c) img.at(v, c, y, x) = static_cast<float>(2.0 * u(rng) - 1.0);
      }
    }
  }
  const UvAccumulator acc = splat(img, bufs, n);
  double worst_color = 0.0, worst_sum = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * n; ++i) {
    double denom = 0.0;
    for (int v = 0; v < k[i]; ++v) denom += std::exp(static_cast<double>(bufs[v].score[i]));
    double wsum = 0.0;
    for (int v = 0; v < k[i]; ++v) wsum += std::exp(static_cast<double>(bufs[v].score[i])) / acc.weight_total[i];
    worst_sum = std::max(worst_sum, std::abs(wsum - 1.0));
    for (int c = 0; c < 3; ++c) {
      double ref = 0.0;
      for (int v = 0; v < k[i]; ++v) {
        ref += std::exp(static_cast<double>(bufs[v].score[i])) / denom * img.data[v * img.view_size() + c * img.plane() + i];
      }
      worst_color = std::max(worst_color, std::abs(acc.fused(c, i) - ref));
    }
  }
  return {worst_color <= 1e-6 && worst_sum <= 1e-6,
          fmt("1e4 texels, max color error %.2e, max |sum w - 1| %.2e", worst_color, worst_sum)};
}

GenerationConfig cube_config() {
  GenerationConfig c;
  c.n_views = 36;
  c.steps = 20;
  c.image_size = 256;
  c.resolutions = {64, 128, 256};
  c.mock_latent = 0;
  c.seed = 0;
  return c;
}

GenerationResult run_cube(const GenerationConfig& cfg) {
  const Scene scene = prepare_scene(make_cube(), cfg);
  const Image gt = default_ground_truth(cfg.resolutions.back());
  MockOracleDenoiser mock = make_mock_denoiser(scene, cfg, gt);
  return generate(scene, mock, cfg, &gt);
}

Outcome oracle_convergence(int& last_timestep) {
  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const GenerationResult r = run_cube(cube_config());
  const double secs = seconds_since(t0);
  omp_set_num_threads(omp_get_num_procs());
  last_timestep = r.report.last_timestep;
  const double p = r.report.psnr_vs_gt.value_or(0.0);
  const double cov = r.report.coverage_fraction;

  GenerationConfig vae = cube_config();
  vae.mock_latent = 64;
  const double p64 = run_cube(vae).report.psnr_vs_gt.value_or(0.0);
  return {p >= 40.0 && cov >= 0.95 && secs < 60.0,
          fmt("PSNR %.2f dB, coverage %.4f, %.1f s single-threaded at 256^2 (latent 64x64 VAE stand-in: %.2f dB, "
              "informational)",
              p, cov, secs, p64)};
}

struct PerturbedRuns {
  GenerationReport modified;
  GenerationReport naive;
};

PerturbedRuns perturbed_runs() {
  GenerationConfig c = cube_config();
  c.perturbation = 0.2;
  c.prior_spread = 0.5;
  PerturbedRuns out;
  out.modified = run_cube(c).report;
  c.step_mode = StepMode::Naive;
  out.naive = run_cube(c).report;
  return out;
}

Outcome consistency_mechanism(const PerturbedRuns& r) {
  const double post = r.modified.consistency, pre = r.modified.pre_fusion_consistency;
  return {std::isfinite(post) && post < 0.25 * pre,
          fmt("post-fusion %.4f vs pre-fusion %.4f (ratio %.3f, need < 0.25)", post, pre, post / pre)};
}

Outcome modified_vs_naive(const PerturbedRuns& r) {
  const double pm = r.modified.psnr_vs_gt.value_or(0.0), pn = r.naive.psnr_vs_gt.value_or(0.0);
  const double vm = r.modified.z0_trajectory_variance, vn = r.naive.z0_trajectory_variance;
  return {pm - pn >= 1.0 && vn > vm,
          fmt("PSNR modified %.2f dB, naive %.2f dB (gap %+.2f, need >= 1); z0' variance naive %.5f vs modified %.5f",
              pm, pn, pm - pn, vn, vm)};
}

Outcome camera_selection() {
  const TexturedMesh cube = make_cube();
  bool axes = true;
  std::size_t cube_views = 0;
  double cube_cov = 0.0;
  for (int k : {6, 16}) {
    const ViewRig rig = select_views(cube, k, RigDefaults::kRadius, RigDefaults::kFovY, 64, 0);
    cube_views = rig.size();
    axes = axes && rig.size() == 6;
    std::vector<bool> seen(6, false);
    for (const auto& p : rig.poses) {
      const Vec3 d = p.forward;
      int axis = 0;
      d.cwiseAbs().maxCoeff(&axis);
      axes = axes && std::abs(std::abs(d[axis]) - 1.0) < 1e-9;
      seen[2 * axis + (d[axis] > 0 ? 0 : 1)] = true;
    }
    for (bool b : seen) axes = axes && b;
    cube_cov = coverage_score(cube, rig);
    axes = axes && std::abs(cube_cov - 1.0) < 1e-12;
  }
  const TexturedMesh tet = make_tetrahedron();
  const ViewRig trig = select_views(tet, 16, RigDefaults::kRadius, RigDefaults::kFovY, 64, 0);
  bool faces = trig.size() == 4;
  for (std::size_t f = 0; f < tet.face_count() && faces; ++f) {
    double best = -1.0;
    for (const auto& p : trig.poses) best = std::max(best, tet.face_normals[f].dot(p.forward));
    faces = best > 1.0 - 1e-9;
  }
  return {axes && faces, fmt("cube: %zu axis views, coverage %.12f; tetrahedron k=16: %zu views facing its faces: %s",
                             cube_views, cube_cov, trig.size(), faces ? "yes" : "no")};
}

Outcome inpaint_checks() {
  // Single hole ringed by 0.1 .. 0.8.
  MaskedTexture ring{Image(1, 3, 3), std::vector<std::uint8_t>(9, 1)};
  ring.valid[4] = 0;
  long double mean = 0.0L;
  for (int i = 0, j = 1; i < 9; ++i) {
    if (i == 4) continue;
    ring.texture.data[i] = static_cast<float>(0.1 * j++);
    mean += ring.texture.data[i];
  }
  const Image filled = fill_holes(ring);
  const bool exact_mean = filled.data[4] == static_cast<float>(mean / 8.0L);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::bernoulli_distribution keep(0.4);
  MaskedTexture m{Image(3, 96, 96), std::vector<std::uint8_t>(96 * 96)};
  for (float& v : m.texture.data) v = u(rng);
  for (auto& v : m.valid) v = keep(rng) ? 1 : 0;
  const Image out = fill_holes(m);
  bool preserved = true;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < m.valid.size(); ++i) {
      if (m.valid[i]) preserved = preserved && out.data[c * out.plane() + i] == m.texture.data[c * m.texture.plane() + i];
    }
  }
  const MaskedTexture full{out, std::vector<std::uint8_t>(96 * 96, 1)};
  const bool idempotent = fill_holes(full).data == out.data;
  return {exact_mean && preserved && idempotent,
          fmt("neighbor mean %.9f (exact: %s), valid texels bit-preserved: %s, idempotent: %s", filled.data[4],
              exact_mean ? "yes" : "no", preserved ? "yes" : "no", idempotent ? "yes" : "no")};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "uvfuse_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_obj((dir / "cube.obj").string(), make_cube());
  std::vector<std::string> bytes;
  for (const char* run : {"a", "b"}) {
    GenerationConfig c = cube_config();
    c.image_size = 128;
    c.resolutions = {32, 64, 128};
    c.perturbation = 0.1;
    c.prior_spread = 0.5;
    c.seed = 11;
    c.mesh_path = (dir / "cube.obj").string();
    c.out_dir = (dir / run).string();
    run_generation(c);
    std::ifstream in(dir / run / "texture.png", std::ios::binary);
    bytes.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(dir);
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, fmt("texture.png %zu bytes, identical: %s", bytes[0].size(), same ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };

  int last_timestep = -1;
  report("scheduler identities", scheduler_identities);
  report("oracle convergence", [&] { return oracle_convergence(last_timestep); });
  report("truncation constants", [&] { return truncation_constants(last_timestep); });
  report("multi-scale schedule", scale_schedule);
  report("softmax fusion", softmax_fusion);
  PerturbedRuns perturbed;
  bool have_runs = false;
  auto runs = [&]() -> const PerturbedRuns& {
    if (!have_runs) {
      perturbed = perturbed_runs();
      have_runs = true;
    }
    return perturbed;
  };
  report("consistency mechanism", [&] { return consistency_mechanism(runs()); });
  report("modified vs naive step", [&] { return modified_vs_naive(runs()); });
  report("camera selection", camera_selection);
  report("inpaint", inpaint_checks);
  report("determinism", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
