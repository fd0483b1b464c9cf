#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvfuse/image.hpp"
#include "uvfuse/raster.hpp"
#include "uvfuse/scheduler.hpp"

namespace uvfuse {

struct LatentShape {
  int channels = 3;
  int height = 64;
  int width = 64;
  bool operator==(const LatentShape&) const = default;
};

/// The pretrained model seen through three calls: encode (E), decode (D) and
/// noise prediction. Images are [views, 3, S, S] in [-1, 1]; latents are
/// [views, C, H, W]. One instance serves one generation.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual LatentShape latent_shape() const = 0;
  virtual int image_size() const = 0;
  /// The schedule the model was trained with; the sampler uses it verbatim.
  virtual const NoiseSchedule& schedule() const = 0;

  virtual Tensor4 encode(const Tensor4& images) = 0;
  virtual Tensor4 decode(const Tensor4& latents) = 0;
  /// Noise prediction for the views listed in `view_ids` (z_t.views entries).
  virtual Tensor4 predict_noise(const Tensor4& z_t, int t, std::span<const int> view_ids) = 0;

  /// Condition images per view (index = view id). Ignored by the mock.
  virtual void set_conditions(std::vector<ConditionImages> conditions) { (void)conditions; }

  std::uint64_t noise_calls() const { return noise_calls_; }

 protected:
  std::uint64_t noise_calls_ = 0;  // counted per view
};

/// Ground truth for the mock oracle: per-view target images and optional
/// per-view additive perturbations (same shape, may be empty).
struct OracleTarget {
  Image ground_truth_texture;
  Tensor4 per_view_targets;
  Tensor4 perturbations;
};

/// Renders the oracle targets of `texture` through every view's UV buffer.
OracleTarget make_oracle_target(const Image& texture, std::span<const ViewBuffers> buffers,
                                float background = 1.0f);

/// Per-view additive deltas: one sinusoidal plane wave per view and channel
/// (random direction, 1-3 cycles per image, random phase) of the given
/// amplitude, so each delta has zero mean over the image. Zero on background.
Tensor4 make_view_perturbations(std::span<const ViewBuffers> buffers, double amplitude,
                                std::uint64_t seed);

struct MockOptions {
  LatentShape latent{3, 64, 64};
  int image_size = 512;
  /// 0 makes the z0 prediction the exact encoded target regardless of z_t.
  /// > 0 returns the posterior mean for a Gaussian prior of this standard
  /// deviation centered on the target, so the prediction follows the
  /// trajectory the way a trained denoiser does.
  double prior_spread = 0.0;
};

/// Closed-loop test denoiser. Encode is an area downsample (channels
/// replicated or truncated), decode a bilinear upsample; both linear.
class MockOracleDenoiser final : public Denoiser {
 public:
  MockOracleDenoiser(NoiseSchedule schedule, MockOptions options);

  void set_oracle(OracleTarget target);
  const std::optional<OracleTarget>& oracle() const { return oracle_; }

  LatentShape latent_shape() const override { return options_.latent; }
  int image_size() const override { return options_.image_size; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  Tensor4 encode(const Tensor4& images) override;
  Tensor4 decode(const Tensor4& latents) override;
  Tensor4 predict_noise(const Tensor4& z_t, int t, std::span<const int> view_ids) override;

 private:
  NoiseSchedule schedule_;
  MockOptions options_;
  std::optional<OracleTarget> oracle_;
  Tensor4 encoded_targets_;
};

// Wire format helpers: tensors travel as
// {"shape": [n, c, h, w], "dtype": "float32", "data": base64(little-endian f32, row-major)}.
nlohmann::json tensor_to_json(const Tensor4& t);
Tensor4 tensor_from_json(const nlohmann::json& j);
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

struct RemoteOptions {
  std::string url = "http://127.0.0.1:8000";
  std::string prompt;
  int image_size = 512;
  int n_views = 36;
  std::uint64_t seed = 0;
  std::vector<double> controlnet_weights{0.5, 0.5};
  int batch_views = 4;      // views per predict_noise request
  int max_in_flight = 2;    // concurrent requests
  int timeout_seconds = 600;
};

/// Client for the diffusion service. The constructor opens the session and
/// adopts the service's latent shape and sigma table. Throws Transport.
class RemoteDenoiser final : public Denoiser {
 public:
  explicit RemoteDenoiser(RemoteOptions options);

  const std::string& session_id() const { return session_id_; }
  LatentShape latent_shape() const override { return latent_; }
  int image_size() const override { return options_.image_size; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  Tensor4 encode(const Tensor4& images) override;
  Tensor4 decode(const Tensor4& latents) override;
  Tensor4 predict_noise(const Tensor4& z_t, int t, std::span<const int> view_ids) override;
  void set_conditions(std::vector<ConditionImages> conditions) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  RemoteOptions options_;
  std::string session_id_;
  LatentShape latent_;
  NoiseSchedule schedule_;
  std::vector<ConditionImages> conditions_;
};

/// Slices views `ids` out of `t` (in the given order).
Tensor4 gather_views(const Tensor4& t, std::span<const int> ids);

}  // namespace uvfuse
