#include "uvfuse/scheduler.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "uvfuse/error.hpp"

namespace uvfuse {

namespace {

void check_sizes(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) throw Error(ErrorCode::ShapeMismatch, "latent buffers differ in length");
}

double sigma_last(int T, double a, double b) {
  double abar = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double r = a + (b - a) * (t - 1) / (T - 1);
    abar *= 1.0 - r * r;
  }
  return std::sqrt(1.0 - abar);
}

}  // namespace

NoiseSchedule make_schedule(int T, double sigma_min, double sigma_max) {
  if (T < 2 || !(sigma_min > 0.0) || !(sigma_min < sigma_max) || !(sigma_max < 1.0)) {
    throw Error(ErrorCode::InvalidRange, "schedule needs T >= 2 and 0 < sigma_min < sigma_max < 1");
  }
  const double a = sigma_min;
  double lo = a;
  double hi = 1.0;
  if (sigma_last(T, a, lo) > sigma_max) {
    throw Error(ErrorCode::InvalidRange, "sigma_max too small for a non-decreasing ramp");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (sigma_last(T, a, mid) < sigma_max ? lo : hi) = mid;
  }
  const double b = 0.5 * (lo + hi);

  std::vector<double> sigmas;
  sigmas.reserve(T);
  double abar = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double r = a + (b - a) * (t - 1) / (T - 1);
    abar *= 1.0 - r * r;
    sigmas.push_back(std::sqrt(1.0 - abar));
  }
  return schedule_from_sigmas(sigmas);
}

NoiseSchedule schedule_from_sigmas(std::span<const double> sigmas) {
  if (sigmas.size() < 2) throw Error(ErrorCode::InvalidRange, "schedule needs at least 2 timesteps");
  NoiseSchedule s;
  s.total_steps = static_cast<int>(sigmas.size());
  s.sigma.reserve(sigmas.size() + 1);
  s.sigma.push_back(0.0);
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double v = sigmas[i];
    if (!(v > 0.0 && v < 1.0) || !(v > s.sigma.back())) {
      throw Error(ErrorCode::InvalidRange,
                  "sigma must be strictly increasing inside (0,1) at t=" + std::to_string(i + 1));
    }
    s.sigma.push_back(v);
  }
  s.alpha.reserve(s.sigma.size());
  for (double v : s.sigma) s.alpha.push_back(std::sqrt(1.0 - v * v));
  return s;
}

void write_schedule_table(std::ostream& out, const NoiseSchedule& s) {
  std::ostringstream line;
  line.precision(17);
  for (int t = 1; t <= s.total_steps; ++t) line << t << ' ' << s.sigma[t] << '\n';
  out << line.str();
}

NoiseSchedule read_schedule_table(std::istream& in) {
  std::vector<double> sigmas;
  std::string row;
  int line_no = 0;
  while (std::getline(in, row)) {
    ++line_no;
    std::istringstream ss(row);
    int t = 0;
    double sigma = 0.0;
    if (!(ss >> t)) continue;  // blank line
    if (!(ss >> sigma) || t != static_cast<int>(sigmas.size()) + 1) {
      throw Error(ErrorCode::Parse, "schedule table line " + std::to_string(line_no) +
                                        ": expected consecutive 't sigma' rows from t=1");
    }
    sigmas.push_back(sigma);
  }
  return schedule_from_sigmas(sigmas);
}

std::vector<int> subsample_timesteps(const NoiseSchedule& s, int n_steps, double truncation) {
  if (n_steps < 1 || !(truncation > 0.0 && truncation <= 1.0)) {
    throw Error(ErrorCode::InvalidRange, "need n_steps >= 1 and truncation in (0,1]");
  }
  const int T = s.total_steps;
  const int last = std::max(1, static_cast<int>(std::lround(T * (1.0 - truncation))));
  if (n_steps == 1) return {T};
  if (n_steps > T - last + 1) {
    throw Error(ErrorCode::InvalidRange, "more steps than timesteps in the truncated range");
  }
  std::vector<int> out;
  out.reserve(n_steps);
  const double stride = static_cast<double>(T - last) / (n_steps - 1);
  for (int i = 0; i < n_steps; ++i) {
    out.push_back(static_cast<int>(std::lround(T - i * stride)));
  }
  out.back() = last;
  return out;
}

template <class T>
void predict_z0(std::span<const T> z_t, std::span<const T> eps, int t, const NoiseSchedule& s,
                std::span<T> z0) {
  check_sizes(z_t.size(), eps.size(), z0.size());
  const double a = s.alpha_at(t);
  const double sg = s.sigma_at(t);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    z0[i] = static_cast<T>((z_t[i] - sg * eps[i]) / a);
  }
}

template <class T>
void guided_noise(std::span<const T> z_t, std::span<const T> z0_fused, int t, const NoiseSchedule& s,
                  std::span<T> eps) {
  check_sizes(z_t.size(), z0_fused.size(), eps.size());
  const double a = s.alpha_at(t);
  const double sg = s.sigma_at(t);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i] = static_cast<T>((z_t[i] - a * z0_fused[i]) / sg);
  }
}

template <class T>
void modified_step(std::span<const T> z_t, std::span<const T> z0_fused, int t, int t_prev,
                   const NoiseSchedule& s, std::span<T> z_out) {
  check_sizes(z_t.size(), z0_fused.size(), z_out.size());
  if (t_prev >= t) throw Error(ErrorCode::InvalidRange, "t_prev must precede t");
  const double a = s.alpha_at(t);
  const double sg = s.sigma_at(t);
  const double a_prev = s.alpha_at(t_prev);
  const double sg_prev = s.sigma_at(t_prev);
  for (std::size_t i = 0; i < z_out.size(); ++i) {
    const double eps = (z_t[i] - a * z0_fused[i]) / sg;
    z_out[i] = static_cast<T>(a_prev * z0_fused[i] + sg_prev * eps);
  }
}

template <class T>
void naive_step(std::span<const T> z0_fused, int t_prev, const NoiseSchedule& s, std::mt19937_64& rng,
                std::span<T> z_out) {
  if (z0_fused.size() != z_out.size()) {
    throw Error(ErrorCode::ShapeMismatch, "latent buffers differ in length");
  }
  const double a_prev = s.alpha_at(t_prev);
  const double sg_prev = s.sigma_at(t_prev);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < z_out.size(); ++i) {
    z_out[i] = static_cast<T>(a_prev * z0_fused[i] + sg_prev * normal(rng));
  }
}

#define UVFUSE_INSTANTIATE_STEPS(T)                                                              \
  template void predict_z0<T>(std::span<const T>, std::span<const T>, int, const NoiseSchedule&,       \
                              std::span<T>);                                                            \
  template void guided_noise<T>(std::span<const T>, std::span<const T>, int, const NoiseSchedule&,     \
                                std::span<T>);                                                          \
  template void modified_step<T>(std::span<const T>, std::span<const T>, int, int,                     \
                                 const NoiseSchedule&, std::span<T>);                                   \
  template void naive_step<T>(std::span<const T>, int, const NoiseSchedule&, std::mt19937_64&,         \
                              std::span<T>);

UVFUSE_INSTANTIATE_STEPS(float)
UVFUSE_INSTANTIATE_STEPS(double)
#undef UVFUSE_INSTANTIATE_STEPS

std::mt19937_64 view_stream(std::uint64_t master_seed, int view, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(view), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

void fill_standard_normal(std::mt19937_64& rng, std::span<float> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) v = static_cast<float>(normal(rng));
}

}  // namespace uvfuse
