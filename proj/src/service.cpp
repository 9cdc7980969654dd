#include "lpknn/service.hpp"

#include <cmath>
#include <cstring>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lpknn/error.hpp"
#include "lpknn/features.hpp"
#include "lpknn/image.hpp"
#include "lpknn/pipeline.hpp"

namespace lpknn {

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

ServiceResponse json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump()};
}

ServiceResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

// Graph cache key and the exact lambda the pipeline will use.
struct QuantizedParams {
  SegParams params;
  std::string key;
};

QuantizedParams quantize(int k, const FeatureWeights& lambda) {
  QuantizedParams q;
  q.params.k = k;
  std::ostringstream key;
  key << k;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    const long long units = std::llround(lambda[c] * 1e6);
    q.params.lambda[c] = static_cast<double>(units) / 1e6;
    key << ':' << units;
  }
  q.key = key.str();
  return q;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char ch : text) {
    if (ch == '=') break;
    const char* p = std::strchr(kAlphabet, ch);
    if (ch == '\0' || p == nullptr) throw DecodeError("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(p - kAlphabet);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

struct SegService::Session {
  std::mutex mutex;
  RgbImage image;
  std::optional<FeatureMatrix> normalized;  // lambda = 1, computed lazily
  std::map<std::string, std::shared_ptr<const PixelGraph>> graphs;
  std::optional<std::vector<std::uint8_t>> last_mask;
  Clock::time_point last_used;
};

SegService::SegService(ServiceConfig config) : config_(std::move(config)) {
  std::random_device rd;
  id_state_[0] = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  id_state_[1] = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

SegService::~SegService() = default;

std::string SegService::new_id() {
  // splitmix64 over the random seed; ids only need to be unguessable-ish and
  // unique within the process.
  auto next = [](std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << next(id_state_[0]);
  out.width(16);
  out << next(id_state_[1]);
  return out.str();
}

std::shared_ptr<SegService::Session> SegService::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  return it->second;
}

std::size_t SegService::expire_idle(Clock::time_point now) {
  std::vector<std::shared_ptr<Session>> expired;
  std::lock_guard lock(mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    // A session busy with a request is not idle.
    if (session_lock.owns_lock() && now - it->second->last_used > config_.idle_timeout) {
      session_lock.unlock();
      expired.push_back(it->second);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
  return expired.size();
}

std::size_t SegService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SegService::cached_graph_count(const std::string& id) const {
  auto s = find(id);
  if (!s) return 0;
  std::lock_guard lock(s->mutex);
  return s->graphs.size();
}

ServiceResponse SegService::create_session(std::span<const std::uint8_t> image_bytes) {
  expire_idle(Clock::now());
  auto session = std::make_shared<Session>();
  try {
    const Dimensions dims = probe_dimensions(image_bytes);
    if (dims.width < 1 || dims.height < 1) return error_response(400, "empty image");
    const auto pixels = static_cast<std::size_t>(dims.width) * dims.height;
    if (pixels > config_.max_pixels) {
      return error_response(413, "image has " + std::to_string(pixels) +
                                     " pixels; the limit is " +
                                     std::to_string(config_.max_pixels));
    }
    session->image = decode_rgb(image_bytes);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  session->last_used = Clock::now();
  const int width = session->image.width;
  const int height = session->image.height;
  std::string id;
  {
    std::lock_guard lock(mutex_);
    do {
      id = new_id();
    } while (sessions_.contains(id));
    sessions_.emplace(id, std::move(session));
  }
  return json_response(200, {{"id", id}, {"width", width}, {"height", height}});
}

ServiceResponse SegService::segment(const std::string& id, std::string_view request_json) {
  expire_idle(Clock::now());
  auto session = find(id);
  if (!session) return error_response(404, "unknown session " + id);
  std::lock_guard session_lock(session->mutex);
  session->last_used = Clock::now();
  const auto started = Clock::now();

  nlohmann::json request;
  try {
    request = nlohmann::json::parse(request_json);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }

  std::vector<BrushStroke> strokes;
  int k = 10;
  FeatureWeights lambda = unit_weights();
  try {
    if (!request.is_object() || !request.contains("scribbles") ||
        !request["scribbles"].is_array()) {
      return error_response(422, "request needs a 'scribbles' array");
    }
    for (const auto& s : request["scribbles"]) {
      BrushStroke bs;
      bs.class_id = s.at("class").get<int>();
      bs.brush_radius = s.value("brush_radius", 0);
      for (const auto& p : s.at("points")) {
        const auto xy = p.get<std::vector<int>>();
        if (xy.size() != 2) return error_response(422, "points must be [x, y] pairs");
        bs.points.push_back({xy[0], xy[1]});
      }
      strokes.push_back(std::move(bs));
    }
    if (request.contains("k")) k = request["k"].get<int>();
    if (request.contains("lambda")) {
      lambda = weights_from(request["lambda"].get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, std::string("invalid request: ") + e.what());
  } catch (const Error& e) {
    return error_response(422, e.what());
  }

  std::set<int> classes;
  for (const auto& s : strokes) {
    if (!s.points.empty()) classes.insert(s.class_id);
  }
  if (classes.size() < 2) {
    return error_response(422, "scribbles must cover at least 2 classes, got " +
                                   std::to_string(classes.size()));
  }

  const RgbImage& image = session->image;
  const QuantizedParams q = quantize(k, lambda);
  SegmentationResult result;
  bool cache_hit = false;
  std::size_t conflicts = 0;
  try {
    q.params.validate();
    const auto pixels = rasterize_strokes(image.width, image.height, strokes);
    const ScribbleSeeds decoded = decode_scribbles(image.width, image.height, pixels);
    conflicts = decoded.conflicts.size();

    std::shared_ptr<const PixelGraph> graph;
    if (auto it = session->graphs.find(q.key); it != session->graphs.end()) {
      graph = it->second;
      cache_hit = true;
    } else if (decoded.seeds.unlabeled_count() > 0) {
      if (!session->normalized) {
        // Scribble seeds never ignore pixels, so the node set is the image.
        session->normalized = node_features(image, decoded.seeds);
      }
      FeatureMatrix features = *session->normalized;
      scale_columns(features, q.params.lambda);
      graph = std::make_shared<const PixelGraph>(
          build_pixel_graph(features, decoded.seeds, q.params.k, config_.workers));
      session->graphs.emplace(q.key, graph);
    }
    SegmentOptions options;
    options.workers = config_.workers;
    options.monitor = config_.monitor;
    result = graph ? segment_on_graph(*graph, decoded.seeds, options)
                   : segment_on_graph(PixelGraph{}, decoded.seeds, options);
  } catch (const Error& e) {
    return error_response(422, e.what());
  }

  const auto png = encode_png(encode_mask(result));
  session->last_mask = png;
  const double ms =
      std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  nlohmann::json body;
  body["iterations"] = result.iterations;
  body["converged"] = result.converged;
  body["ms"] = ms;
  body["classes"] = result.class_count;
  body["width"] = result.width;
  body["height"] = result.height;
  body["cache_hit"] = cache_hit;
  body["conflicts"] = conflicts;
  body["levels"] = nlohmann::json::array();
  for (int c = 1; c <= result.class_count; ++c) {
    body["levels"].push_back(mask_level(c, result.class_count));
  }
  body["mask_png"] = base64_encode(png);
  return json_response(200, body);
}

ServiceResponse SegService::mask(const std::string& id) {
  expire_idle(Clock::now());
  auto session = find(id);
  if (!session) return error_response(404, "unknown session " + id);
  std::lock_guard lock(session->mutex);
  session->last_used = Clock::now();
  if (!session->last_mask) return error_response(404, "no mask computed yet");
  return {200, "image/png",
          std::string(session->last_mask->begin(), session->last_mask->end())};
}

ServiceResponse SegService::remove(const std::string& id) {
  std::shared_ptr<Session> doomed;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return error_response(404, "unknown session " + id);
    doomed = std::move(it->second);
    sessions_.erase(it);
  }
  return json_response(200, {{"deleted", id}});
}

}  // namespace lpknn
