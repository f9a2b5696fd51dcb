#include "trafficmon/service/service.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <sstream>
#include <tuple>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon::service {

using codec::json;

Resolution parse_resolution(std::string_view text) {
  if (text == "minute") return Resolution::kMinute;
  if (text == "hour") return Resolution::kHour;
  throw ValidationError("resolution must be 'minute' or 'hour'");
}

TrafficService::TrafficService(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.storage_root),
      bus_(config_.subscriber_capacity) {}

void TrafficService::register_camera(CameraRecord camera) {
  validate(camera);
  validate_camera_id(camera.camera_id);
  std::unique_lock lock(registry_mutex_);
  if (cameras_.contains(camera.camera_id)) {
    throw DuplicateIdError("camera '" + camera.camera_id + "' is already registered");
  }
  const std::string id = camera.camera_id;
  cameras_.emplace(id, std::make_shared<CameraEntry>(std::move(camera), config_.pipeline));
}

std::vector<CameraRecord> TrafficService::cameras() const {
  std::shared_lock lock(registry_mutex_);
  std::vector<CameraRecord> out;
  for (const auto& [id, e] : cameras_) out.push_back(e->pipeline.camera());
  return out;
}

bool TrafficService::has_camera(const std::string& camera_id) const {
  std::shared_lock lock(registry_mutex_);
  return cameras_.contains(camera_id);
}

std::shared_ptr<TrafficService::CameraEntry> TrafficService::entry(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = cameras_.find(id);
  if (it == cameras_.end()) throw NotFoundError("unknown camera '" + id + "'");
  return it->second;
}

namespace {

json count_tick(const MinuteAggregate& agg) {
  const json full = codec::to_json(agg);
  return json{{"cam", agg.camera_id},
              {"minute_start_ts", agg.minute_start_ts},
              {"counts", full.at("counts")}};
}

}  // namespace

// Called with the camera's mutex held, so per-camera event order follows
// processing order.
void TrafficService::publish(CameraEntry& e, PipelineOutput&& out, bool status_changed) {
  const std::string& cam = e.pipeline.camera().camera_id;
  for (const auto& alert : out.alerts) {
    bus_.publish("anomaly_alert", cam, codec::to_json(alert).dump());
  }
  for (const auto& agg : out.closed) {
    store_.append(agg);
    if (!agg.counts.empty()) bus_.publish("count_tick", cam, count_tick(agg).dump());
  }
  if (status_changed || !out.closed.empty() || !out.alerts.empty()) {
    bus_.publish("status_delta", cam, camera_status_json(e.pipeline.status()));
  }
}

namespace {

bool material_change(const CameraStatus& a, const CameraStatus& b) {
  return a.queue_severity != b.queue_severity || a.active_anomalies != b.active_anomalies ||
         a.stale != b.stale || a.road_type != b.road_type;
}

}  // namespace

void TrafficService::ingest_frame(const FrameDetections& frame) {
  auto e = entry(frame.camera_id);
  std::lock_guard lock(e->mutex);
  const CameraStatus before = e->pipeline.status();
  auto out = e->pipeline.process_frame(frame);
  e->last_input = std::chrono::steady_clock::now();
  e->has_input = true;
  publish(*e, std::move(out), material_change(before, e->pipeline.status()));
}

void TrafficService::ingest_queue_sample(const QueueSample& sample) {
  auto e = entry(sample.camera_id);
  std::lock_guard lock(e->mutex);
  const CameraStatus before = e->pipeline.status();
  auto out = e->pipeline.process_queue_sample(sample);
  e->last_input = std::chrono::steady_clock::now();
  e->has_input = true;
  publish(*e, std::move(out), material_change(before, e->pipeline.status()));
}

void TrafficService::finish_camera(const std::string& camera_id) {
  auto e = entry(camera_id);
  std::lock_guard lock(e->mutex);
  const CameraStatus before = e->pipeline.status();
  auto out = e->pipeline.finish();
  publish(*e, std::move(out), material_change(before, e->pipeline.status()));
}

CameraStatus TrafficService::status(const std::string& camera_id) const {
  auto e = entry(camera_id);
  std::lock_guard lock(e->mutex);
  return e->pipeline.status();
}

std::vector<CameraStatus> TrafficService::statuses() const {
  std::vector<std::shared_ptr<CameraEntry>> entries;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, e] : cameras_) entries.push_back(e);
  }
  std::vector<CameraStatus> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    std::lock_guard lock(e->mutex);
    out.push_back(e->pipeline.status());
  }
  return out;
}

QueryResult TrafficService::query(std::string_view q) const {
  std::string lowered(q);
  for (auto& c : lowered) {
    c = c == ',' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::istringstream words(lowered);
  std::vector<std::function<bool(const CameraStatus&)>> predicates;
  std::vector<std::string> unknown;
  std::string w;
  while (words >> w) {
    if (w == "congestion" || w == "congested") {
      predicates.emplace_back([](const CameraStatus& s) {
        return s.queue_severity && *s.queue_severity != SeverityLevel::kLow;
      });
    } else if (w == "anomaly" || w == "anomalies" || w == "stalled") {
      predicates.emplace_back([](const CameraStatus& s) { return s.active_anomalies > 0; });
    } else if (w == "rain" || w == "snow") {
      const WeatherTag tag = parse_weather(w);
      predicates.emplace_back([tag](const CameraStatus& s) { return s.weather_tag == tag; });
    } else {
      unknown.push_back(w);
    }
  }
  QueryResult result;
  if (!unknown.empty()) {
    std::string msg = "unknown keyword(s):";
    for (const auto& u : unknown) msg += " '" + u + "'";
    result.warning = msg;
    return result;
  }
  for (const auto& s : statuses()) {
    if (std::all_of(predicates.begin(), predicates.end(), [&](const auto& p) { return p(s); })) {
      result.cameras.push_back(s);
    }
  }
  return result;
}

HistoryResult TrafficService::history(const std::string& camera_id,
                                      std::optional<std::int64_t> from_ts,
                                      std::optional<std::int64_t> to_ts,
                                      Resolution resolution) const {
  entry(camera_id);  // existence check
  const std::int64_t from = from_ts.value_or(std::numeric_limits<std::int64_t>::min() / 2);
  const std::int64_t to = to_ts.value_or(std::numeric_limits<std::int64_t>::max() / 2);
  HistoryResult result;
  auto minutes = store_.read(camera_id, from, to);
  const std::int64_t step =
      resolution == Resolution::kHour ? 60 * config_.pipeline.aggregation_ms : config_.pipeline.aggregation_ms;
  result.series = resolution == Resolution::kHour ? fold_aggregates(minutes, step) : std::move(minutes);
  for (std::size_t i = 1; i < result.series.size(); ++i) {
    const std::int64_t expected = result.series[i - 1].minute_start_ts + step;
    if (result.series[i].minute_start_ts > expected) {
      result.gaps.emplace_back(expected, result.series[i].minute_start_ts);
    }
  }
  return result;
}

SeverityHeatmap TrafficService::heatmap(const std::string& camera_id, int days) const {
  entry(camera_id);
  if (days <= 0 || days > 366) throw ValidationError("days must be in [1, 366]");
  SeverityHeatmap map;
  const std::int64_t agg_ms = config_.pipeline.aggregation_ms;
  map.bin_minutes = static_cast<int>(std::max<std::int64_t>(1, agg_ms / kMsPerMinute));
  const int bins = 1440 / map.bin_minutes;
  const auto stored = store_.days(camera_id);
  map.first_day = stored.empty() ? 0 : stored.back() - days + 1;
  map.mean_length.assign(days, std::vector<std::optional<double>>(bins));
  map.cells.assign(days, std::vector<std::optional<SeverityLevel>>(bins));
  if (stored.empty()) return map;
  for (const auto& agg : store_.read(camera_id, map.first_day * kMsPerDay,
                                     (map.first_day + days) * kMsPerDay)) {
    const auto row = day_index(agg.minute_start_ts) - map.first_day;
    const int col = time_of_day_bin(agg.minute_start_ts, map.bin_minutes);
    map.mean_length[row][col] = agg.mean_pl;
    map.cells[row][col] = agg.severity;
  }
  return map;
}

std::vector<AnomalyEvent> TrafficService::anomalies(std::optional<bool> active) const {
  std::vector<std::shared_ptr<CameraEntry>> entries;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, e] : cameras_) entries.push_back(e);
  }
  std::vector<AnomalyEvent> out;
  for (const auto& e : entries) {
    std::lock_guard lock(e->mutex);
    for (const auto& ev : e->pipeline.anomaly_events()) {
      if (ev.status != AnomalyStatus::kConfirmed) continue;
      if (active && *active != !ev.end_ts_ms.has_value()) continue;
      out.push_back(ev);
    }
  }
  std::sort(out.begin(), out.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    return std::tie(a.start_ts_ms, a.camera_id, a.track_id) <
           std::tie(b.start_ts_ms, b.camera_id, b.track_id);
  });
  return out;
}

void TrafficService::sweep_stale(std::chrono::steady_clock::time_point now) {
  std::vector<std::shared_ptr<CameraEntry>> entries;
  {
    std::shared_lock lock(registry_mutex_);
    for (const auto& [id, e] : cameras_) entries.push_back(e);
  }
  for (const auto& e : entries) {
    std::lock_guard lock(e->mutex);
    if (!e->has_input || e->pipeline.status().stale) continue;
    if (now - e->last_input > config_.stale_after) {
      e->pipeline.set_stale(true);
      bus_.publish("status_delta", e->pipeline.camera().camera_id,
                   camera_status_json(e->pipeline.status()));
    }
  }
}

void replay(TrafficService& service, const std::string& camera_id,
            const std::vector<FrameDetections>& frames, const std::vector<QueueSample>& queue) {
  std::size_t f = 0, q = 0;
  while (f < frames.size() || q < queue.size()) {
    const bool take_frame =
        q >= queue.size() || (f < frames.size() && frames[f].timestamp_ms <= queue[q].timestamp_ms);
    if (take_frame) {
      FrameDetections frame = frames[f++];
      frame.camera_id = camera_id;
      service.ingest_frame(frame);
    } else {
      QueueSample sample = queue[q++];
      sample.camera_id = camera_id;
      service.ingest_queue_sample(sample);
    }
  }
  service.finish_camera(camera_id);
}

}  // namespace trafficmon::service
