#include "trafficmon/service/http_server.hpp"

#include <httplib.h>

#include <atomic>
#include <thread>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon::service {

using codec::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, json{{"error", message}}, status);
}

std::optional<std::int64_t> int_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const auto text = req.get_param_value(name);
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ValidationError(std::string("query parameter '") + name + "' must be an integer");
  }
  return v;
}

std::optional<bool> bool_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const auto text = req.get_param_value(name);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError(std::string("query parameter '") + name + "' must be true or false");
}

json statuses_json(const std::vector<CameraStatus>& statuses) {
  json arr = json::array();
  for (const auto& s : statuses) arr.push_back(codec::to_json(s));
  return arr;
}

std::string sse_frame(const Event& ev) {
  std::string out = "id: " + std::to_string(ev.seq) + "\nevent: " + ev.type + "\ndata: ";
  out += ev.data;
  out += "\n\n";
  return out;
}

}  // namespace

struct HttpServer::Impl {
  Impl(TrafficService& s, HttpOptions o) : service(s), options(std::move(o)) {}

  TrafficService& service;
  HttpOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
  int bound_port = -1;

  // Maps engine errors onto HTTP statuses.
  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const DuplicateIdError& e) {
      send_error(res, 409, e.what());
    } catch (const SequencingError& e) {
      send_error(res, 409, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    }
  }

  void routes() {
    server.Get("/cameras", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, statuses_json(service.statuses()));
    });

    server.Post("/cameras", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        CameraRecord camera = parse_camera_record(req.body);
        service.register_camera(camera);
        send_json(res, codec::to_json(camera), 201);
      });
    });

    server.Get(R"(/cameras/([^/]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, codec::to_json(service.status(req.matches[1]))); });
    });

    server.Get(R"(/cameras/([^/]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto resolution = parse_resolution(
            req.has_param("resolution") ? req.get_param_value("resolution") : "minute");
        const auto h = service.history(req.matches[1], int_param(req, "from"), int_param(req, "to"),
                                       resolution);
        json series = json::array();
        for (const auto& a : h.series) series.push_back(codec::to_json(a));
        json gaps = json::array();
        for (const auto& [s, e] : h.gaps) gaps.push_back({s, e});
        send_json(res, json{{"camera_id", std::string(req.matches[1])},
                            {"resolution", resolution == Resolution::kHour ? "hour" : "minute"},
                            {"series", series},
                            {"gaps", gaps}});
      });
    });

    server.Get(R"(/cameras/([^/]+)/heatmap)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto days = int_param(req, "days").value_or(7);
        const auto map = service.heatmap(req.matches[1], static_cast<int>(days));
        json body = json::parse(heatmap_json(map));
        body["camera_id"] = std::string(req.matches[1]);
        send_json(res, body);
      });
    });

    server.Post(R"(/cameras/([^/]+)/frames)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string cam = req.matches[1];
        if (!service.has_camera(cam)) throw NotFoundError("unknown camera '" + cam + "'");
        auto frames = parse_detection_log(req.body);
        for (auto& f : frames) {
          f.camera_id = cam;
          service.ingest_frame(f);
        }
        send_json(res, json{{"accepted", frames.size()}});
      });
    });

    server.Post(R"(/cameras/([^/]+)/queue)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string cam = req.matches[1];
        if (!service.has_camera(cam)) throw NotFoundError("unknown camera '" + cam + "'");
        auto samples = parse_queue_samples(req.body);
        for (auto& s : samples) {
          s.camera_id = cam;
          service.ingest_queue_sample(s);
        }
        send_json(res, json{{"accepted", samples.size()}});
      });
    });

    server.Get("/anomalies", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json arr = json::array();
        for (const auto& e : service.anomalies(bool_param(req, "active"))) arr.push_back(codec::to_json(e));
        send_json(res, arr);
      });
    });

    server.Get("/query", [this](const httplib::Request& req, httplib::Response& res) {
      const auto result = service.query(req.has_param("q") ? req.get_param_value("q") : "");
      send_json(res, json{{"cameras", statuses_json(result.cameras)},
                          {"warning", result.warning ? json(*result.warning) : json()}});
    });

    server.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = service.events().subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub, idle = std::chrono::milliseconds(0)](std::size_t, httplib::DataSink& sink) mutable {
            if (stopping || sub->closed()) return false;
            constexpr std::chrono::milliseconds kPoll{200};
            if (auto ev = sub->pop(kPoll)) {
              idle = std::chrono::milliseconds(0);
              const auto frame = sse_frame(*ev);
              return sink.write(frame.data(), frame.size());
            }
            idle += kPoll;
            if (idle >= options.sse_keepalive) {
              idle = std::chrono::milliseconds(0);
              static constexpr char kKeepAlive[] = ": keepalive\n\n";
              return sink.write(kKeepAlive, sizeof(kKeepAlive) - 1);
            }
            return true;
          },
          [this, sub](bool) { service.events().unsubscribe(sub); });
    });
  }
};

HttpServer::HttpServer(TrafficService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  auto& s = impl_->server;
  impl_->bound_port = impl_->options.port == 0 ? s.bind_to_any_port(impl_->options.host)
                                               : (s.bind_to_port(impl_->options.host, impl_->options.port)
                                                      ? impl_->options.port
                                                      : -1);
  if (impl_->bound_port < 0) {
    throw Error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void HttpServer::run() {
  start();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->service.events().close_all();
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const { return impl_->bound_port; }

}  // namespace trafficmon::service
