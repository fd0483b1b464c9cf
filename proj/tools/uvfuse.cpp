// uvfuse command line: generate, views, render.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>

#include <CLI11.hpp>

#include "uvfuse/error.hpp"
#include "uvfuse/pipeline.hpp"
#include "uvfuse/primitives.hpp"

namespace {

using namespace uvfuse;

int run_views(const std::string& mesh_path, int k, std::uint64_t seed) {
  const TexturedMesh mesh = load_mesh(mesh_path);
  const ViewRig rig = select_views(mesh, k, RigDefaults::kRadius, RigDefaults::kFovY, RigDefaults::kImageSize, seed);
  std::printf("# %zu views, coverage %.6f\n", rig.size(), coverage_score(mesh, rig));
  for (const auto& p : rig.poses) {
    const Vec3 d = p.position.normalized();
    std::printf("%.6f %.6f %.6f\n", d.x(), d.y(), d.z());
  }
  return 0;
}

int run_render(const std::string& mesh_path, const std::string& texture_path, const std::string& out, int size) {
  const TexturedMesh mesh = load_mesh(mesh_path);
  write_turntable(mesh, read_png_rgb(texture_path), out, size);
  std::printf("wrote 36 frames to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture synthesis for UV-mapped meshes by multi-view diffusion fused in UV space"};
  app.require_subcommand(1);

  GenerationConfig cfg;
  auto* gen = app.add_subcommand("generate", "Generate a texture for a mesh");
  gen->set_config("--config", "", "key=value file; flags given on the command line win");
  gen->add_option("--mesh", cfg.mesh_path, "OBJ mesh with UVs")->required();
  gen->add_option("--prompt", cfg.prompt, "Text prompt")->required();
  gen->add_option("--views", cfg.n_views, "Number of views (cluster count with --select-views)");
  bool select = false;
  gen->add_flag("--select-views", select, "Choose cameras by weighted K-means over face normals");
  gen->add_option("--steps", cfg.steps, "Sampling steps");
  gen->add_option("--truncation", cfg.truncation, "Fraction of the schedule to traverse");
  gen->add_option("--seed", cfg.seed, "Master seed");
  const std::map<std::string, DenoiserMode> denoisers{{"mock", DenoiserMode::Mock}, {"remote", DenoiserMode::Remote}};
  gen->add_option("--denoiser", cfg.denoiser, "mock or remote")->transform(CLI::CheckedTransformer(denoisers));
  gen->add_option("--service-url", cfg.service_url, "Diffusion service base URL");
  const std::map<std::string, StepMode> modes{{"modified", StepMode::Modified}, {"naive", StepMode::Naive}};
  gen->add_option("--step-mode", cfg.step_mode, "modified or naive")->transform(CLI::CheckedTransformer(modes));
  gen->add_option("--out", cfg.out_dir, "Output directory");
  gen->add_flag("--debug", cfg.debug, "Write per-step fused textures under debug/");
  gen->add_option("--image-size", cfg.image_size, "View resolution");
  gen->add_option("--resolutions", cfg.resolutions, "Three increasing texture resolutions")->expected(3);
  gen->add_option("--temperature", cfg.temperature, "Softmax temperature of the view weights");
  gen->add_option("--oracle-texture", cfg.oracle_texture, "Mock oracle ground-truth texture (PNG)");
  gen->add_option("--mock-latent", cfg.mock_latent, "Mock latent grid side (0 = image size)");
  gen->add_option("--prior-spread", cfg.prior_spread, "Mock prior spread (0 = exact oracle)");
  gen->add_option("--perturbation", cfg.perturbation, "Mock per-view perturbation amplitude");

  std::string mesh_path;
  int k = RigDefaults::kSelectClusters;
  std::uint64_t seed = 0;
  auto* views = app.add_subcommand("views", "Print camera directions chosen by weighted K-means");
  views->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  views->add_option("--k", k, "Cluster count");
  views->add_option("--seed", seed, "Seed");

  std::string texture_path;
  std::string out_dir = "render";
  int size = RigDefaults::kImageSize;
  auto* render = app.add_subcommand("render", "Render a texture from the 36 default poses");
  render->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  render->add_option("--texture", texture_path, "Texture PNG")->required();
  render->add_option("--out", out_dir, "Output directory");
  render->add_option("--image-size", size, "Frame resolution");

  std::string shape = "cube";
  std::string obj_out = "mesh.obj";
  auto* prim = app.add_subcommand("primitive", "Write a built-in UV-mapped test mesh as OBJ");
  prim->add_option("--shape", shape, "cube, tetrahedron, sphere or quad")
      ->check(CLI::IsMember({"cube", "tetrahedron", "sphere", "quad"}));
  prim->add_option("--out", obj_out, "Output OBJ path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      cfg.rig_mode = select ? RigMode::Select : RigMode::Uniform;
      const GenerationReport rep = run_generation(cfg);
      std::cout << rep.to_json().dump(2) << '\n';
      return 0;
    }
    if (*views) return run_views(mesh_path, k, seed);
    if (*prim) {
      const TexturedMesh mesh = shape == "cube"          ? make_cube()
                                : shape == "tetrahedron" ? make_tetrahedron()
                                : shape == "sphere"      ? make_uv_sphere(16, 32)
                                                         : make_quad();
      write_obj(obj_out, mesh);
      return 0;
    }
    return run_render(mesh_path, texture_path, out_dir, size);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
