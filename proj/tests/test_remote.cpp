// Remote client against an in-process fake of the diffusion service that
// speaks the wire protocol and answers with the mock oracle.
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "support.hpp"
#include "uvfuse/denoiser.hpp"

// After Eigen: the resolver headers pulled in here define a `_res` macro.
#include <httplib.h>

using namespace uvfuse;
using nlohmann::json;

namespace {

constexpr int kImage = 32;
constexpr int kViews = 36;

class FakeService {
 public:
  FakeService() : mock_(make_schedule(), MockOptions{{4, 8, 8}, kImage, 0.0}) {
    OracleTarget target;
    target.per_view_targets = testing::random_tensor(kViews, 3, kImage, kImage, 21);
    mock_.set_oracle(target);

    server_.Post("/v1/session", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      std::lock_guard lock(mu_);
      last_session_request_ = body;
      const std::string id = "s" + std::to_string(sessions_++);
      json table = json::array();
      for (int t = 1; t <= mock_.schedule().total_steps; ++t) table.push_back({t, mock_.schedule().sigma_at(t)});
      res.set_content(json{{"session_id", id}, {"latent_shape", {4, 8, 8}}, {"sigma_table", table}}.dump(),
                      "application/json");
    });
    server_.Post("/v1/encode", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const json& body) { return json{{"z", tensor_to_json(mock_.encode(tensor_from_json(body.at("images"))))}}; });
    });
    server_.Post("/v1/decode", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const json& body) { return json{{"images", tensor_to_json(mock_.decode(tensor_from_json(body.at("z"))))}}; });
    });
    server_.Post("/v1/predict_noise", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [this](const json& body) {
        const auto ids = body.at("view_ids").get<std::vector<int>>();
        const Tensor4 depth = tensor_from_json(body.at("depth"));
        const Tensor4 lineart = tensor_from_json(body.at("lineart"));
        if (depth.views != static_cast<int>(ids.size()) || depth.channels != 1 || depth.height != kImage ||
            !lineart.same_shape(depth)) {
          throw Error(ErrorCode::ShapeMismatch, "condition tensors");
        }
        depth_sums_.push_back({ids.front(), depth.data[0]});
        ++predict_requests_;
        return json{{"eps", tensor_to_json(mock_.predict_noise(tensor_from_json(body.at("z_t")), body.at("t").get<int>(), ids))}};
      });
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  MockOracleDenoiser& mock() { return mock_; }
  json last_session_request() {
    std::lock_guard lock(mu_);
    return last_session_request_;
  }
  int predict_requests() const { return predict_requests_; }
  std::vector<std::pair<int, float>> depth_samples() {
    std::lock_guard lock(mu_);
    return depth_sums_;
  }

 private:
  template <class Fn>
  void handle(const httplib::Request& req, httplib::Response& res, Fn fn) {
    try {
      const json body = json::parse(req.body);
      std::lock_guard lock(mu_);
      if (!body.contains("session_id") || body.at("session_id").get<std::string>().rfind("s", 0) != 0) {
        res.status = 404;
        res.set_content("unknown session", "text/plain");
        return;
      }
      res.set_content(fn(body).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    }
  }

  MockOracleDenoiser mock_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  int sessions_ = 0;
  std::atomic<int> predict_requests_{0};
  json last_session_request_;
  std::vector<std::pair<int, float>> depth_sums_;
};

RemoteOptions options(const FakeService& svc, int batch, int in_flight) {
  RemoteOptions o;
  o.url = svc.url();
  o.prompt = "a wooden crate";
  o.image_size = kImage;
  o.n_views = kViews;
  o.seed = 17;
  o.batch_views = batch;
  o.max_in_flight = in_flight;
  o.timeout_seconds = 30;
  return o;
}

}  // namespace

TEST_SUITE("remote") {
  TEST_CASE("session negotiation adopts the service schedule and latent shape") {
    FakeService svc;
    RemoteDenoiser remote(options(svc, 4, 2));
    CHECK(remote.latent_shape() == LatentShape{4, 8, 8});
    CHECK(remote.schedule().sigma == svc.mock().schedule().sigma);
    for (int t = 0; t <= remote.schedule().total_steps; ++t) {
      const double a = remote.schedule().alpha_at(t), s = remote.schedule().sigma_at(t);
      CHECK(std::abs(a * a + s * s - 1.0) < 1e-6);
    }
    const json req = svc.last_session_request();
    CHECK(req.at("prompt") == "a wooden crate");
    CHECK(req.at("image_size") == kImage);
    CHECK(req.at("n_views") == kViews);
    CHECK(req.at("seed") == 17);
    CHECK(req.at("controlnet_weights") == json::array({0.5, 0.5}));
  }

  TEST_CASE("encode, decode and noise prediction over the wire") {
    FakeService svc;
    RemoteDenoiser remote(options(svc, 4, 2));
    const Tensor4 images = testing::random_tensor(kViews, 3, kImage, kImage, 2);
    const Tensor4 z = remote.encode(images);
    CHECK(z.data == svc.mock().encode(images).data);
    const Tensor4 x = remote.decode(z);
    CHECK(x.data == svc.mock().decode(z).data);

    std::vector<ConditionImages> cond(kViews);
    for (int v = 0; v < kViews; ++v) cond[v] = {Image(1, kImage, kImage, 0.01f * v), Image(1, kImage, kImage)};
    remote.set_conditions(cond);

    std::vector<int> ids(kViews);
    for (int v = 0; v < kViews; ++v) ids[v] = v;
    const Tensor4 zt = testing::random_tensor(kViews, 4, 8, 8, 3);
    const Tensor4 eps = remote.predict_noise(zt, 500, ids);
    CHECK(eps.same_shape(zt));
    CHECK(svc.predict_requests() == kViews / 4);
    CHECK(remote.noise_calls() == kViews);
    for (const auto& [first, depth] : svc.depth_samples()) CHECK(depth == doctest::Approx(0.01 * first));

    // Batching is transparent.
    for (auto [batch, window] : {std::pair{1, 1}, std::pair{5, 3}, std::pair{kViews, 1}}) {
      RemoteDenoiser other(options(svc, batch, window));
      other.set_conditions(cond);
      const Tensor4 e2 = other.predict_noise(zt, 500, ids);
      for (std::size_t i = 0; i < eps.data.size(); ++i) CHECK(std::abs(e2.data[i] - eps.data[i]) <= 1e-4);
    }

    // Repeated calls are identical.
    CHECK(remote.predict_noise(zt, 500, ids).data == eps.data);

    // Shape mismatches are caught client side.
    CHECK_THROWS_CODE(remote.encode(Tensor4(1, 3, 16, 16)), ErrorCode::ShapeMismatch);
    CHECK_THROWS_CODE(remote.decode(Tensor4(1, 3, 8, 8)), ErrorCode::ShapeMismatch);
  }

  TEST_CASE("server errors surface as transport errors") {
    FakeService svc;
    RemoteDenoiser remote(options(svc, 4, 2));
    std::vector<int> ids = {40};  // unknown view: the service answers 400
    CHECK_THROWS_CODE(remote.predict_noise(testing::random_tensor(1, 4, 8, 8, 1), 500, ids), ErrorCode::Transport);
  }

  TEST_CASE("unreachable service") {
    int port = 0;
    {
      httplib::Server probe;
      port = probe.bind_to_any_port("127.0.0.1");
    }
    RemoteOptions o;
    o.url = "http://127.0.0.1:" + std::to_string(port);
    o.timeout_seconds = 2;
    CHECK_THROWS_CODE(RemoteDenoiser{o}, ErrorCode::Transport);
  }
}
