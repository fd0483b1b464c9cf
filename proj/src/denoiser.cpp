#include "uvfuse/denoiser.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <future>
#include <numbers>
#include <random>

#include <httplib.h>

#include "uvfuse/error.hpp"

namespace uvfuse {

Tensor4 gather_views(const Tensor4& t, std::span<const int> ids) {
  Tensor4 out(static_cast<int>(ids.size()), t.channels, t.height, t.width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.views) throw Error(ErrorCode::OutOfRange, "view id out of range");
    auto src = t.view(ids[i]);
    std::copy(src.begin(), src.end(), out.view(static_cast<int>(i)).begin());
  }
  return out;
}

OracleTarget make_oracle_target(const Image& texture, std::span<const ViewBuffers> buffers,
                                float background) {
  if (buffers.empty()) throw Error(ErrorCode::EmptyInput, "no views");
  const int n = buffers.front().size;
  OracleTarget target;
  target.ground_truth_texture = texture;
  target.per_view_targets = Tensor4(static_cast<int>(buffers.size()), texture.channels, n, n);
  for (std::size_t v = 0; v < buffers.size(); ++v) {
    target.per_view_targets.set_image(static_cast<int>(v), render_texture(texture, buffers[v], background));
  }
  return target;
}

Tensor4 make_view_perturbations(std::span<const ViewBuffers> buffers, double amplitude,
                                std::uint64_t seed) {
  if (buffers.empty()) throw Error(ErrorCode::EmptyInput, "no views");
  const int n = buffers.front().size;
  Tensor4 out(static_cast<int>(buffers.size()), 3, n, n);
  for (int v = 0; v < out.views; ++v) {
    auto rng = view_stream(seed, v, 0x70657274);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double cycles = 1.0 + 2.0 * unit(rng);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double kx = 2.0 * std::numbers::pi * cycles * std::cos(angle) / n;
      const double ky = 2.0 * std::numbers::pi * cycles * std::sin(angle) / n;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          if (!buffers[v].mask[static_cast<std::size_t>(y) * n + x]) continue;
          out.at(v, c, y, x) = static_cast<float>(amplitude * std::sin(kx * x + ky * y + phase));
        }
      }
    }
  }
  return out;
}

MockOracleDenoiser::MockOracleDenoiser(NoiseSchedule schedule, MockOptions options)
    : schedule_(std::move(schedule)), options_(options) {
  const auto& l = options_.latent;
  if (l.channels < 1 || l.height < 1 || l.width != l.height || options_.image_size % l.height != 0) {
    throw Error(ErrorCode::ShapeMismatch, "mock latent grid must be square and divide the image size");
  }
}

void MockOracleDenoiser::set_oracle(OracleTarget target) {
  auto& t = target.per_view_targets;
  if (t.height != options_.image_size || t.width != options_.image_size || t.channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "oracle targets must be 3 x image_size x image_size");
  }
  Tensor4 x = t;
  if (!target.perturbations.data.empty()) {
    if (!target.perturbations.same_shape(t)) {
      throw Error(ErrorCode::ShapeMismatch, "perturbations must match the targets");
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += target.perturbations.data[i];
  }
  encoded_targets_ = encode(x);
  oracle_ = std::move(target);
}

Tensor4 MockOracleDenoiser::encode(const Tensor4& images) {
  const int s = options_.image_size;
  if (images.height != s || images.width != s || images.channels < 1) {
    throw Error(ErrorCode::ShapeMismatch, "encode expects images of the session size");
  }
  const auto& l = options_.latent;
  const int f = s / l.height;
  const double inv_area = 1.0 / (static_cast<double>(f) * f);
  Tensor4 out(images.views, l.channels, l.height, l.width);
#pragma omp parallel for collapse(2)
  for (int v = 0; v < images.views; ++v) {
    for (int c = 0; c < l.channels; ++c) {
      const int src_c = c % images.channels;
      for (int y = 0; y < l.height; ++y) {
        for (int x = 0; x < l.width; ++x) {
          double sum = 0.0;
          for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) sum += images.at(v, src_c, y * f + dy, x * f + dx);
          }
          out.at(v, c, y, x) = static_cast<float>(sum * inv_area);
        }
      }
    }
  }
  return out;
}

Tensor4 MockOracleDenoiser::decode(const Tensor4& latents) {
  const auto& l = options_.latent;
  if (latents.channels != l.channels || latents.height != l.height || latents.width != l.width) {
    throw Error(ErrorCode::ShapeMismatch, "decode expects latents of the session shape");
  }
  const int s = options_.image_size;
  const double scale = static_cast<double>(l.height) / s;
  Tensor4 out(latents.views, 3, s, s);
#pragma omp parallel for collapse(2)
  for (int v = 0; v < latents.views; ++v) {
    for (int c = 0; c < 3; ++c) {
      const int src_c = c % l.channels;
      for (int y = 0; y < s; ++y) {
        const double fy = std::clamp((y + 0.5) * scale - 0.5, 0.0, static_cast<double>(l.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, l.height - 1);
        const double ay = fy - y0;
        for (int x = 0; x < s; ++x) {
          const double fx = std::clamp((x + 0.5) * scale - 0.5, 0.0, static_cast<double>(l.width - 1));
          const int x0 = static_cast<int>(fx);
          const int x1 = std::min(x0 + 1, l.width - 1);
          const double ax = fx - x0;
          const double top = (1 - ax) * latents.at(v, src_c, y0, x0) + ax * latents.at(v, src_c, y0, x1);
          const double bot = (1 - ax) * latents.at(v, src_c, y1, x0) + ax * latents.at(v, src_c, y1, x1);
          out.at(v, c, y, x) = static_cast<float>((1 - ay) * top + ay * bot);
        }
      }
    }
  }
  return out;
}

Tensor4 MockOracleDenoiser::predict_noise(const Tensor4& z_t, int t, std::span<const int> view_ids) {
  if (!oracle_) throw Error(ErrorCode::OracleUnset, "mock denoiser has no oracle target");
  const auto& l = options_.latent;
  if (z_t.channels != l.channels || z_t.height != l.height || z_t.width != l.width ||
      z_t.views != static_cast<int>(view_ids.size())) {
    throw Error(ErrorCode::ShapeMismatch, "z_t does not match the session latent shape");
  }
  if (t < 1 || t > schedule_.total_steps) throw Error(ErrorCode::OutOfRange, "timestep outside schedule");
  for (int v : view_ids) {
    if (v < 0 || v >= encoded_targets_.views) throw Error(ErrorCode::OutOfRange, "view id out of range");
  }
  const double a = schedule_.alpha_at(t);
  const double sg = schedule_.sigma_at(t);
  const double tau2 = options_.prior_spread * options_.prior_spread;
  const double gain = a * tau2 / (a * a * tau2 + sg * sg);
  Tensor4 eps(z_t.views, z_t.channels, z_t.height, z_t.width);
#pragma omp parallel for
  for (int i = 0; i < z_t.views; ++i) {
    const int v = view_ids[i];
    auto target = encoded_targets_.view(v);
    auto z = z_t.view(i);
    auto e = eps.view(i);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double z0 = target[k] + gain * (z[k] - a * target[k]);
      e[k] = static_cast<float>((z[k] - a * z0) / sg);
    }
  }
  noise_calls_ += view_ids.size();
  return eps;
}

// ---------------------------------------------------------------------------
// Wire format

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::Parse, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::Parse, "invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

nlohmann::json tensor_to_json(const Tensor4& t) {
  std::vector<std::uint8_t> bytes(t.data.size() * 4);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(t.data[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return {{"shape", {t.views, t.channels, t.height, t.width}},
          {"dtype", "float32"},
          {"data", base64_encode(bytes)}};
}

Tensor4 tensor_from_json(const nlohmann::json& j) {
  try {
    if (j.at("dtype").get<std::string>() != "float32") {
      throw Error(ErrorCode::Parse, "tensor dtype must be float32");
    }
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 4 || std::any_of(shape.begin(), shape.end(), [](int d) { return d < 0; })) {
      throw Error(ErrorCode::ShapeMismatch, "tensor shape must have 4 non-negative dims");
    }
    Tensor4 t(shape[0], shape[1], shape[2], shape[3]);
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    if (bytes.size() != t.data.size() * 4) {
      throw Error(ErrorCode::ShapeMismatch, "tensor payload does not match its shape");
    }
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
      t.data[i] = std::bit_cast<float>(bits);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed tensor: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Remote client

namespace {

const nlohmann::json& member(const nlohmann::json& reply, const char* key) {
  if (!reply.is_object() || !reply.contains(key)) {
    throw Error(ErrorCode::Parse, std::string("service reply lacks \"") + key + "\"");
  }
  return reply[key];
}

}  // namespace

RemoteDenoiser::RemoteDenoiser(RemoteOptions options) : options_(std::move(options)) {
  const auto reply = post("/v1/session", {{"prompt", options_.prompt},
                                          {"image_size", options_.image_size},
                                          {"n_views", options_.n_views},
                                          {"controlnet_weights", options_.controlnet_weights},
                                          {"seed", options_.seed}});
  try {
    session_id_ = reply.at("session_id").get<std::string>();
    const auto shape = reply.at("latent_shape").get<std::vector<int>>();
    if (shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "latent_shape must have 3 dims");
    latent_ = {shape[0], shape[1], shape[2]};
    std::vector<double> sigmas;
    for (const auto& row : reply.at("sigma_table")) {
      const int t = row.at(0).get<int>();
      if (t != static_cast<int>(sigmas.size()) + 1) {
        throw Error(ErrorCode::Parse, "sigma_table must list t = 1..T in order");
      }
      sigmas.push_back(row.at(1).get<double>());
    }
    schedule_ = schedule_from_sigmas(sigmas);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed session reply: ") + e.what());
  }
}

nlohmann::json RemoteDenoiser::post(const std::string& path, const nlohmann::json& body) const {
  httplib::Client client(options_.url);
  client.set_read_timeout(options_.timeout_seconds, 0);
  client.set_write_timeout(options_.timeout_seconds, 0);
  client.set_connection_timeout(10, 0);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::Transport,
                "POST " + path + " to " + options_.url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::Transport, "POST " + path + " returned HTTP " + std::to_string(res->status) +
                                          ": " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, "POST " + path + ": reply is not JSON: " + e.what());
  }
}

Tensor4 RemoteDenoiser::encode(const Tensor4& images) {
  if (images.height != options_.image_size || images.width != options_.image_size) {
    throw Error(ErrorCode::ShapeMismatch, "encode expects images of the session size");
  }
  auto z = tensor_from_json(
      member(post("/v1/encode", {{"session_id", session_id_}, {"images", tensor_to_json(images)}}), "z"));
  if (z.views != images.views || z.channels != latent_.channels || z.height != latent_.height ||
      z.width != latent_.width) {
    throw Error(ErrorCode::ShapeMismatch, "service returned latents of unexpected shape");
  }
  return z;
}

Tensor4 RemoteDenoiser::decode(const Tensor4& latents) {
  if (latents.channels != latent_.channels || latents.height != latent_.height ||
      latents.width != latent_.width) {
    throw Error(ErrorCode::ShapeMismatch, "decode expects latents of the session shape");
  }
  auto x = tensor_from_json(
      member(post("/v1/decode", {{"session_id", session_id_}, {"z", tensor_to_json(latents)}}), "images"));
  if (x.views != latents.views || x.height != options_.image_size || x.width != options_.image_size) {
    throw Error(ErrorCode::ShapeMismatch, "service returned images of unexpected shape");
  }
  return x;
}

void RemoteDenoiser::set_conditions(std::vector<ConditionImages> conditions) {
  conditions_ = std::move(conditions);
}

Tensor4 RemoteDenoiser::predict_noise(const Tensor4& z_t, int t, std::span<const int> view_ids) {
  if (z_t.views != static_cast<int>(view_ids.size()) || z_t.channels != latent_.channels ||
      z_t.height != latent_.height || z_t.width != latent_.width) {
    throw Error(ErrorCode::ShapeMismatch, "z_t does not match the session latent shape");
  }
  const int s = options_.image_size;
  const int batch = std::max(1, options_.batch_views);
  Tensor4 eps(z_t.views, z_t.channels, z_t.height, z_t.width);

  auto run_batch = [&](int begin) {
    const int end = std::min(z_t.views, begin + batch);
    std::vector<int> local(end - begin);
    std::vector<int> ids(end - begin);
    for (int i = begin; i < end; ++i) {
      local[i - begin] = i;
      ids[i - begin] = view_ids[i];
    }
    Tensor4 depth(end - begin, 1, s, s);
    Tensor4 lineart(end - begin, 1, s, s);
    for (int i = 0; i < end - begin; ++i) {
      const int v = ids[i];
      if (v >= 0 && v < static_cast<int>(conditions_.size())) {
        depth.set_image(i, conditions_[v].depth_image);
        lineart.set_image(i, conditions_[v].lineart_image);
      }
    }
    const auto reply = post("/v1/predict_noise", {{"session_id", session_id_},
                                                  {"t", t},
                                                  {"view_ids", ids},
                                                  {"z_t", tensor_to_json(gather_views(z_t, local))},
                                                  {"depth", tensor_to_json(depth)},
                                                  {"lineart", tensor_to_json(lineart)}});
    const auto part = tensor_from_json(member(reply, "eps"));
    if (part.views != end - begin || part.channels != z_t.channels || part.height != z_t.height ||
        part.width != z_t.width) {
      throw Error(ErrorCode::ShapeMismatch, "service returned eps of unexpected shape");
    }
    for (int i = begin; i < end; ++i) {
      auto src = part.view(i - begin);
      std::copy(src.begin(), src.end(), eps.view(i).begin());
    }
  };

  // Sliding window of at most max_in_flight outstanding requests.
  std::vector<std::future<void>> in_flight;
  for (int begin = 0; begin < z_t.views; begin += batch) {
    if (static_cast<int>(in_flight.size()) >= std::max(1, options_.max_in_flight)) {
      in_flight.front().get();
      in_flight.erase(in_flight.begin());
    }
    in_flight.push_back(std::async(std::launch::async, run_batch, begin));
  }
  for (auto& f : in_flight) f.get();
  noise_calls_ += view_ids.size();
  return eps;
}

}  // namespace uvfuse
