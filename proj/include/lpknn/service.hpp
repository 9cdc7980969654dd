#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>

#include "lpknn/propagation.hpp"

namespace lpknn {

struct ServiceConfig {
  std::size_t max_pixels = 2'000'000;
  std::chrono::seconds idle_timeout{30 * 60};
  int workers = 1;
  std::string cors_origin = "*";
  ConvergenceMonitor monitor;
};

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Session store and request handling behind the HTTP routes:
//
//   POST   /sessions              image bytes -> {id, width, height}
//   POST   /sessions/{id}/segment scribbles JSON -> {mask_png (base64), stats}
//   GET    /sessions/{id}/mask    last mask as PNG
//   DELETE /sessions/{id}
//
// Segment requests look like
//   {"scribbles": [{"class": 1, "points": [[x, y], ...], "brush_radius": 2}],
//    "k": 10, "lambda": [23 reals]}
// with k and lambda optional. Graphs are cached per session keyed by k and
// lambda quantized to 1e-6; the quantized lambda is also what the pipeline
// uses, so warm and cold responses agree byte for byte.
class SegService {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SegService(ServiceConfig config = {});
  ~SegService();
  SegService(const SegService&) = delete;
  SegService& operator=(const SegService&) = delete;

  ServiceResponse create_session(std::span<const std::uint8_t> image_bytes);
  ServiceResponse segment(const std::string& id, std::string_view request_json);
  ServiceResponse mask(const std::string& id);
  ServiceResponse remove(const std::string& id);

  // Drops sessions idle longer than the configured timeout; returns the count.
  std::size_t expire_idle(Clock::time_point now);

  [[nodiscard]] std::size_t session_count() const;
  [[nodiscard]] std::size_t cached_graph_count(const std::string& id) const;
  [[nodiscard]] const ServiceConfig& config() const { return config_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::string new_id();

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_state_[2];
};

// cpp-httplib front end for a SegService.
class HttpServer {
 public:
  explicit HttpServer(SegService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds to an ephemeral port and returns it; then call listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  bool listen(const std::string& host, int port);
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace lpknn
