#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "trafficmon/service/service.hpp"

namespace trafficmon::service {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  // Keep-alive comment cadence on idle event streams.
  std::chrono::milliseconds sse_keepalive{10'000};
};

// JSON HTTP API and server-sent event stream over a TrafficService.
//   GET  /cameras                     GET /cameras/{id}/status
//   GET  /cameras/{id}/history        GET /cameras/{id}/heatmap
//   GET  /anomalies?active=bool       GET /query?q=...
//   POST /cameras                     GET /events
//   POST /cameras/{id}/frames         POST /cameras/{id}/queue
class HttpServer {
 public:
  HttpServer(TrafficService& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Blocks serving on the calling thread.
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trafficmon::service
