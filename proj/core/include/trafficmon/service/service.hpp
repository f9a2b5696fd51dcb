#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/ingest.hpp"
#include "trafficmon/pipeline.hpp"
#include "trafficmon/queue.hpp"
#include "trafficmon/service/event_bus.hpp"
#include "trafficmon/service/storage.hpp"

namespace trafficmon::service {

struct ServiceConfig {
  std::filesystem::path storage_root = "trafficmon-data";
  PipelineConfig pipeline;
  // Wall-clock silence after which a camera is flagged stale.
  std::chrono::milliseconds stale_after{60'000};
  std::size_t subscriber_capacity = 1024;
};

struct QueryResult {
  std::vector<CameraStatus> cameras;
  std::optional<std::string> warning;
};

enum class Resolution : std::uint8_t { kMinute, kHour };

Resolution parse_resolution(std::string_view text);

struct HistoryResult {
  std::vector<MinuteAggregate> series;
  // Missing intervals [start, end) between the first and last record.
  std::vector<std::pair<std::int64_t, std::int64_t>> gaps;
};

// Multi-camera orchestration: one CameraPipeline per registered camera,
// snapshot statuses, storage of closed intervals and the event stream.
class TrafficService {
 public:
  explicit TrafficService(ServiceConfig config);

  // Throws DuplicateIdError / ValidationError.
  void register_camera(CameraRecord camera);
  std::vector<CameraRecord> cameras() const;
  bool has_camera(const std::string& camera_id) const;

  // Each throws NotFoundError for an unregistered camera and
  // SequencingError for out-of-order input.
  void ingest_frame(const FrameDetections& frame);
  void ingest_queue_sample(const QueueSample& sample);
  void finish_camera(const std::string& camera_id);

  CameraStatus status(const std::string& camera_id) const;
  std::vector<CameraStatus> statuses() const;
  // Keywords (AND-combined): congestion -> severity >= medium;
  // anomaly/stalled -> active anomalies; rain/snow -> weather tag.
  QueryResult query(std::string_view q) const;
  HistoryResult history(const std::string& camera_id, std::optional<std::int64_t> from_ts,
                        std::optional<std::int64_t> to_ts, Resolution resolution) const;
  // `days` rows ending at the camera's newest stored day.
  SeverityHeatmap heatmap(const std::string& camera_id, int days) const;
  // Confirmed events; `active` filters on whether the event is still open.
  std::vector<AnomalyEvent> anomalies(std::optional<bool> active) const;

  // Flags cameras whose last input is older than stale_after at `now`.
  void sweep_stale(std::chrono::steady_clock::time_point now);

  EventBus& events() { return bus_; }
  const AggregateStore& storage() const { return store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  struct CameraEntry {
    explicit CameraEntry(CameraRecord record, const PipelineConfig& cfg)
        : pipeline(std::move(record), cfg) {}
    mutable std::mutex mutex;
    CameraPipeline pipeline;
    std::chrono::steady_clock::time_point last_input{};
    bool has_input = false;
  };

  std::shared_ptr<CameraEntry> entry(const std::string& camera_id) const;
  void publish(CameraEntry& e, PipelineOutput&& out, bool status_changed);

  ServiceConfig config_;
  AggregateStore store_;
  EventBus bus_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<CameraEntry>> cameras_;
};

// Feeds one camera's frames and queue samples into the service in
// timestamp order (frames first on ties), then finishes the camera.
void replay(TrafficService& service, const std::string& camera_id,
            const std::vector<FrameDetections>& frames, const std::vector<QueueSample>& queue);

}  // namespace trafficmon::service
