#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace uvfuse {

/// Noise levels indexed by timestep t in [0, T]. Entry 0 is the clean
/// endpoint (sigma = 0, alpha = 1); alpha_t = sqrt(1 - sigma_t^2).
struct NoiseSchedule {
  int total_steps = 0;  // T
  std::vector<double> sigma;
  std::vector<double> alpha;

  double sigma_at(int t) const { return sigma.at(t); }
  double alpha_at(int t) const { return alpha.at(t); }
};

struct ScheduleDefaults {
  static constexpr int kTotalSteps = 1000;
  // Scaled-linear beta ramp 0.00085 -> 0.012 over 1000 steps.
  static constexpr double kSigmaMin = 0.029154759474226504;  // sqrt(0.00085)
  static constexpr double kSigmaMax = 0.99766722983514;
};

/// Scaled-linear variance schedule: beta_t = (a + (t-1)/(T-1) (b - a))^2 with
/// a = sigma_min (so sigma_1 = sigma_min) and b solved so sigma_T = sigma_max.
/// Throws InvalidRange.
NoiseSchedule make_schedule(int total_steps = ScheduleDefaults::kTotalSteps,
                            double sigma_min = ScheduleDefaults::kSigmaMin,
                            double sigma_max = ScheduleDefaults::kSigmaMax);

/// Builds a schedule from sigma_1..sigma_T (sigma_0 = 0 is implied).
NoiseSchedule schedule_from_sigmas(std::span<const double> sigmas_from_t1);

/// Plain-text table, one "t sigma_t" pair per line for t = 1..T.
void write_schedule_table(std::ostream& out, const NoiseSchedule& schedule);
NoiseSchedule read_schedule_table(std::istream& in);

/// `n_steps` descending timesteps evenly spaced from T down to
/// max(1, round(T (1 - truncation_fraction))).
std::vector<int> subsample_timesteps(const NoiseSchedule& schedule, int n_steps,
                                     double truncation_fraction);

// Elementwise trajectory arithmetic on latent buffers of equal length.
// Instantiated for float (pipeline latents) and double.

/// z0 = (z_t - sigma_t eps) / alpha_t
template <class T>
void predict_z0(std::span<const T> z_t, std::span<const T> eps, int t, const NoiseSchedule& s,
                std::span<T> z0_out);

/// eps' = (z_t - alpha_t z0') / sigma_t
template <class T>
void guided_noise(std::span<const T> z_t, std::span<const T> z0_fused, int t, const NoiseSchedule& s,
                  std::span<T> eps_out);

/// z_{t_prev} = alpha_prev z0' + sigma_prev eps'  (deterministic, guided noise)
template <class T>
void modified_step(std::span<const T> z_t, std::span<const T> z0_fused, int t, int t_prev,
                   const NoiseSchedule& s, std::span<T> z_out);

/// z_{t_prev} = alpha_prev z0' + sigma_prev n,  n ~ N(0, I) drawn from `rng`
template <class T>
void naive_step(std::span<const T> z0_fused, int t_prev, const NoiseSchedule& s, std::mt19937_64& rng,
                std::span<T> z_out);

/// Per-view random stream derived from a master seed; adding views leaves
/// the streams of existing views unchanged.
std::mt19937_64 view_stream(std::uint64_t master_seed, int view, std::uint64_t purpose);

void fill_standard_normal(std::mt19937_64& rng, std::span<float> out);

}  // namespace uvfuse
