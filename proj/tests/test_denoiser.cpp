#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "support.hpp"
#include "uvfuse/denoiser.hpp"
#include "uvfuse/primitives.hpp"

using namespace uvfuse;

namespace {

MockOracleDenoiser small_mock(int latent = 8, int image = 32, double spread = 0.0) {
  return MockOracleDenoiser(make_schedule(), MockOptions{{3, latent, latent}, image, spread});
}

float golden_value(int i) {
  float v = static_cast<float>((i % 17) - 8) * 0.125f + static_cast<float>(i) * std::ldexp(1.0f, -10);
  if (i == 0) v = -0.0f;
  if (i == 1) v = 1e-40f;
  if (i == 2) v = std::numeric_limits<float>::max();
  if (i == 3) v = static_cast<float>(-1.0 / 3.0);
  return v;
}

}  // namespace

TEST_SUITE("denoiser") {
  TEST_CASE("mock encode and decode basics") {
    auto mock = small_mock();
    Tensor4 flat(2, 3, 32, 32, 0.5f);
    const Tensor4 z = mock.encode(flat);
    CHECK(z.views == 2);
    CHECK(z.channels == 3);
    CHECK(z.height == 8);
    for (float v : z.data) CHECK(v == 0.5f);
    const Tensor4 back = mock.decode(z);
    CHECK(back.same_shape(flat));
    for (float v : back.data) CHECK(v == 0.5f);

    // Linearity of decode.
    const Tensor4 r = testing::random_tensor(1, 3, 8, 8, 4);
    Tensor4 r3 = r;
    for (auto& v : r3.data) v *= 3.0f;
    const Tensor4 d1 = mock.decode(r), d3 = mock.decode(r3);
    for (std::size_t i = 0; i < d1.data.size(); ++i) CHECK(d3.data[i] == doctest::Approx(3.0 * d1.data[i]).epsilon(1e-5));

    CHECK_THROWS_CODE(mock.encode(Tensor4(1, 3, 16, 16)), ErrorCode::ShapeMismatch);
    CHECK_THROWS_CODE(mock.decode(Tensor4(1, 3, 4, 4)), ErrorCode::ShapeMismatch);
    CHECK_THROWS_CODE(MockOracleDenoiser(make_schedule(), MockOptions{{3, 7, 7}, 32, 0.0}), ErrorCode::ShapeMismatch);
  }

  TEST_CASE("mock channel replication and truncation") {
    MockOracleDenoiser four(make_schedule(), MockOptions{{4, 8, 8}, 32, 0.0});
    Tensor4 img(1, 3, 32, 32);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) img.at(0, c, y, x) = 0.1f * (c + 1);
      }
    }
    const Tensor4 z = four.encode(img);
    CHECK(z.at(0, 3, 2, 2) == doctest::Approx(0.1));
    CHECK(z.at(0, 2, 2, 2) == doctest::Approx(0.3));
    const Tensor4 x = four.decode(z);
    CHECK(x.channels == 3);
    CHECK(x.at(0, 1, 5, 5) == doctest::Approx(0.2));
  }

  TEST_CASE("mock round trip on band-limited images") {
    auto mock = small_mock(64, 512);
    Tensor4 img(1, 3, 512, 512);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 512; ++y) {
        for (int x = 0; x < 512; ++x) {
          img.at(0, c, y, x) = static_cast<float>(0.6 * std::sin(2 * std::numbers::pi * (2.0 * x + (c + 1.0) * y) / 512.0));
        }
      }
    }
    const Tensor4 back = mock.decode(mock.encode(img));
    CHECK(psnr(img.image(0), back.image(0)) >= 35.0);
  }

  TEST_CASE("mock oracle recovers the encoded target for any z_t") {
    auto mock = small_mock();
    Tensor4 ids_t(2, 3, 8, 8);
    std::vector<int> ids = {0, 1};
    CHECK_THROWS_CODE(mock.predict_noise(ids_t, 500, ids), ErrorCode::OracleUnset);

    OracleTarget target;
    target.per_view_targets = testing::random_tensor(2, 3, 32, 32, 1);
    mock.set_oracle(target);
    const Tensor4 enc = mock.encode(target.per_view_targets);
    const NoiseSchedule& s = mock.schedule();
    for (int t : {1, 300, 999, 1000}) {
      const Tensor4 z = testing::random_tensor(2, 3, 8, 8, t, -3.0, 3.0);
      const Tensor4 eps = mock.predict_noise(z, t, ids);
      Tensor4 z0(2, 3, 8, 8);
      predict_z0<float>(z.data, eps.data, t, s, z0.data);
      for (std::size_t i = 0; i < z0.data.size(); ++i) CHECK(std::abs(z0.data[i] - enc.data[i]) <= 1e-5);
    }
    CHECK(mock.noise_calls() == 8);

    // Subsets and reordering of views.
    const std::vector<int> one = {1};
    const Tensor4 z1 = testing::random_tensor(1, 3, 8, 8, 77);
    const Tensor4 e1 = mock.predict_noise(z1, 400, one);
    Tensor4 z0(1, 3, 8, 8);
    predict_z0<float>(z1.data, e1.data, 400, s, z0.data);
    for (std::size_t i = 0; i < z0.data.size(); ++i) CHECK(std::abs(z0.data[i] - enc.view(1)[i]) <= 1e-5);

    const std::vector<int> bad = {5};
    CHECK_THROWS_CODE(mock.predict_noise(z1, 400, bad), ErrorCode::OutOfRange);
    CHECK_THROWS_CODE(mock.predict_noise(z1, 0, one), ErrorCode::OutOfRange);
  }

  TEST_CASE("mock prior spread follows the Gaussian posterior mean") {
    auto mock = small_mock(8, 32, 0.5);
    OracleTarget target;
    target.per_view_targets = Tensor4(1, 3, 32, 32, 0.2f);
    mock.set_oracle(target);
    const NoiseSchedule& s = mock.schedule();
    const int t = 600;
    const double a = s.alpha_at(t), sg = s.sigma_at(t);
    const Tensor4 z = testing::random_tensor(1, 3, 8, 8, 3);
    const std::vector<int> ids = {0};
    const Tensor4 eps = mock.predict_noise(z, t, ids);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      // Posterior mean of z0 ~ N(m, tau^2) given z = a z0 + sg n.
      const double m = 0.2, tau2 = 0.25;
      const double post = (m * sg * sg + a * tau2 * z.data[i]) / (a * a * tau2 + sg * sg);
      const double z0 = (z.data[i] - sg * eps.data[i]) / a;
      CHECK(z0 == doctest::Approx(post).epsilon(1e-4));
    }
  }

  TEST_CASE("view perturbations are zero-mean plane waves on the foreground") {
    ViewBuffers b(64);
    std::fill(b.mask.begin(), b.mask.end(), 1);
    std::vector<ViewBuffers> bufs(3, b);
    const Tensor4 d = make_view_perturbations(bufs, 0.2, 5);
    for (int v = 0; v < 3; ++v) {
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0, peak = 0.0;
        for (int y = 0; y < 64; ++y) {
          for (int x = 0; x < 64; ++x) {
            mean += d.at(v, c, y, x);
            peak = std::max(peak, std::abs(static_cast<double>(d.at(v, c, y, x))));
          }
        }
        CHECK(std::abs(mean / (64 * 64)) < 0.03);
        CHECK(peak <= 0.2 + 1e-6);
        CHECK(peak > 0.15);
      }
    }
    bufs[0].mask.assign(bufs[0].mask.size(), 0);
    const Tensor4 d2 = make_view_perturbations(bufs, 0.2, 5);
    for (float v : d2.view(0)) CHECK(v == 0.0f);
  }

  TEST_CASE("base64 matches RFC 4648 vectors") {
    auto enc = [](const std::string& s) {
      return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foob") == "Zm9vYg==");
    CHECK(enc("fooba") == "Zm9vYmE=");
    CHECK(enc("foobar") == "Zm9vYmFy");
    for (const std::string s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) {
      const auto back = base64_decode(enc(s));
      CHECK(std::string(back.begin(), back.end()) == s);
    }
    CHECK_THROWS_CODE(base64_decode("abc"), ErrorCode::Parse);
    CHECK_THROWS_CODE(base64_decode("a*c="), ErrorCode::Parse);
  }

  TEST_CASE("golden tensor decodes and re-encodes byte for byte") {
    std::ifstream in(std::string(UVFUSE_TEST_DATA) + "/golden_tensor.json");
    REQUIRE(in.good());
    const nlohmann::json golden = nlohmann::json::parse(in);
    const Tensor4 t = tensor_from_json(golden);
    CHECK(t.views == 2);
    CHECK(t.channels == 3);
    CHECK(t.height == 4);
    CHECK(t.width == 5);
    for (int i = 0; i < 120; ++i) {
      CHECK(std::bit_cast<std::uint32_t>(t.data[i]) == std::bit_cast<std::uint32_t>(golden_value(i)));
    }
    CHECK(t.at(1, 2, 3, 4) == golden_value(119));
    const nlohmann::json again = tensor_to_json(t);
    CHECK(again.at("data").get<std::string>() == golden.at("data").get<std::string>());
    CHECK(again.at("shape") == golden.at("shape"));
    CHECK(again.at("dtype") == "float32");
  }

  TEST_CASE("malformed tensors are rejected") {
    nlohmann::json j = tensor_to_json(Tensor4(1, 1, 2, 2, 1.0f));
    j["dtype"] = "float16";
    CHECK_THROWS_CODE(tensor_from_json(j), ErrorCode::Parse);
    j = tensor_to_json(Tensor4(1, 1, 2, 2, 1.0f));
    j["shape"] = {1, 1, 2, 3};
    CHECK_THROWS_CODE(tensor_from_json(j), ErrorCode::ShapeMismatch);
    j.erase("data");
    CHECK_THROWS_CODE(tensor_from_json(j), ErrorCode::Parse);
  }

  TEST_CASE("gather_views") {
    const Tensor4 t = testing::random_tensor(4, 2, 3, 3, 8);
    const std::vector<int> ids = {3, 1};
    const Tensor4 g = gather_views(t, ids);
    REQUIRE(g.views == 2);
    CHECK(std::equal(g.view(0).begin(), g.view(0).end(), t.view(3).begin()));
    CHECK(std::equal(g.view(1).begin(), g.view(1).end(), t.view(1).begin()));
  }
}
