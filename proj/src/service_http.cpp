#include "httplib.h"
#include "lpknn/service.hpp"

namespace lpknn {

struct HttpServer::Impl {
  SegService& service;
  httplib::Server server;

  explicit Impl(SegService& s) : service(s) {}

  static void send(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  void mount() {
    const std::string origin = service.config().cors_origin;
    server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      if (!origin.empty()) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
      }
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      std::string upload;
      std::string_view body = req.body;
      if (req.is_multipart_form_data() && req.has_file("image")) {
        upload = req.get_file_value("image").content;
        body = upload;
      }
      const auto* data = reinterpret_cast<const std::uint8_t*>(body.data());
      send(res, service.create_session({data, body.size()}));
    });
    server.Post(R"(/sessions/([0-9a-f]+)/segment)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  send(res, service.segment(req.matches[1], req.body));
                });
    server.Get(R"(/sessions/([0-9a-f]+)/mask)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 send(res, service.mask(req.matches[1]));
               });
    server.Delete(R"(/sessions/([0-9a-f]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    send(res, service.remove(req.matches[1]));
                  });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
  }
};

HttpServer::HttpServer(SegService& service) : impl_(std::make_unique<Impl>(service)) {
  impl_->mount();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace lpknn
