#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvfuse/cameras.hpp"
#include "uvfuse/denoiser.hpp"
#include "uvfuse/geometry.hpp"
#include "uvfuse/image.hpp"
#include "uvfuse/raster.hpp"

namespace uvfuse {

enum class RigMode { Uniform, Select };
enum class DenoiserMode { Mock, Remote };
enum class StepMode { Modified, Naive };

struct GenerationConfig {
  std::string mesh_path;
  std::string prompt;
  RigMode rig_mode = RigMode::Uniform;
  int n_views = 36;
  int steps = 20;
  double truncation = 0.7;
  std::vector<int> resolutions{128, 256, 512};  // coarse, middle, fine
  std::uint64_t seed = 0;
  DenoiserMode denoiser = DenoiserMode::Mock;
  std::string service_url = "http://127.0.0.1:8000";
  StepMode step_mode = StepMode::Modified;
  std::string out_dir = "out";
  bool debug = false;

  int image_size = 512;
  double temperature = 1.0;
  float inpaint_background = 0.0f;  // mid-gray

  // Mock oracle only.
  std::string oracle_texture;  // PNG; empty selects the built-in checkerboard
  int mock_latent = 64;        // latent grid side; 0 = image size
  double prior_spread = 0.0;
  double perturbation = 0.0;   // amplitude of per-view deltas

  /// Throws InvalidRange on a violated invariant.
  void validate() const;
};

struct GenerationReport {
  std::string texture_path;
  std::size_t holes_before_inpaint = 0;
  std::size_t holes_after_inpaint = 0;
  std::vector<double> step_seconds;
  double total_seconds = 0.0;
  double consistency = 0.0;             // post-fusion cross-view error
  double pre_fusion_consistency = 0.0;  // same metric on the last decoded views
  double coverage_fraction = 0.0;
  int last_timestep = 0;
  std::uint64_t denoiser_calls_per_view = 0;
  std::optional<double> psnr_vs_gt;     // mock oracle only
  std::vector<double> step_psnr;        // fused texture vs. GT after each step
  double z0_trajectory_variance = 0.0;  // per-element variance of z0' over steps

  nlohmann::json to_json() const;
};

/// Mesh plus the rig and its rasterized buffers.
struct Scene {
  TexturedMesh mesh;
  ViewRig rig;
  std::vector<ViewBuffers> buffers;
};

Scene prepare_scene(TexturedMesh mesh, const GenerationConfig& config);

struct GenerationResult {
  Image texture;                        // after inpainting
  Image fused;                          // before inpainting, holes at the background value
  std::vector<std::uint8_t> hole_mask;
  Tensor4 last_views;                   // decoded per-view x0 of the final step, before fusion
  GenerationReport report;              // paths left empty
};

/// The denoising loop. `ground_truth` enables the per-step PSNR trace.
GenerationResult generate(const Scene& scene, Denoiser& denoiser, const GenerationConfig& config,
                          const Image* ground_truth = nullptr);

/// Default procedural ground truth for the mock oracle.
Image default_ground_truth(int resolution);

/// Builds the mock oracle for `scene` (targets rendered from `ground_truth`).
MockOracleDenoiser make_mock_denoiser(const Scene& scene, const GenerationConfig& config,
                                      const Image& ground_truth);

/// Loads the mesh, runs generation and writes every output under
/// config.out_dir. Returns the report that was written to report.json.
GenerationReport run_generation(const GenerationConfig& config);

/// Mean over view pairs of the mean absolute color difference (averaged over
/// channels) on UV texels seen by both views. Each view is first averaged into
/// its own `resolution`^2 UV grid by nearest texel. 0 with fewer than 2 views.
double cross_view_discrepancy(const Tensor4& view_images, std::span<const ViewBuffers> buffers,
                              int resolution);

/// Renders `texture` into every view and measures cross_view_discrepancy at
/// the texture's resolution. Throws HolesPresent if `hole_mask` has a hole.
double consistency_metric(const Image& texture, std::span<const std::uint8_t> hole_mask,
                          std::span<const ViewBuffers> buffers);

/// Renders the textured mesh from the 36 default rig poses to
/// dir/frame_%02d.png (white background).
void write_turntable(const TexturedMesh& mesh, const Image& texture, const std::string& dir, int image_size);

}  // namespace uvfuse
