#include "trafficmon/pipeline.hpp"

#include <algorithm>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

namespace {

constexpr std::int64_t kMsPerHour = 3'600'000;

std::int64_t floor_to(std::int64_t ts, std::int64_t step) {
  const std::int64_t q = ts / step;
  return (ts % step != 0 && ts < 0 ? q - 1 : q) * step;
}

AnomalyMonitor::Options monitor_options(const CameraRecord& camera, const PipelineConfig& cfg) {
  auto opts = cfg.anomaly;
  if (camera.road_type_override) opts.road_type_override = camera.road_type_override;
  return opts;
}

Tracker make_tracker(const PipelineConfig& cfg) {
  return cfg.tracker == TrackerKind::kIou ? Tracker(cfg.iou) : Tracker(cfg.feature);
}

}  // namespace

void PipelineOutput::append(PipelineOutput&& other) {
  alerts.insert(alerts.end(), other.alerts.begin(), other.alerts.end());
  counts.insert(counts.end(), other.counts.begin(), other.counts.end());
  closed.insert(closed.end(), other.closed.begin(), other.closed.end());
}

CameraPipeline::CameraPipeline(CameraRecord camera, PipelineConfig config)
    : camera_(std::move(camera)),
      config_(std::move(config)),
      tracker_(make_tracker(config_)),
      monitor_(camera_.camera_id, monitor_options(camera_, config_)),
      counter_(camera_.counting_lines),
      thresholds_(config_.thresholds) {
  if (config_.aggregation_ms <= 0) throw ValidationError("aggregation_ms must be > 0");
  if (config_.history_days <= 0) throw ValidationError("history_days must be > 0");
  status_.camera_id = camera_.camera_id;
  status_.weather_tag = camera_.weather_tag.value_or(WeatherTag::kClear);
  status_.road_type = monitor_.road_type();
}

void CameraPipeline::check_order(std::int64_t ts) const {
  if (finished_) throw SequencingError("pipeline for '" + camera_.camera_id + "' is finished");
  if (last_ts_ && ts < *last_ts_) {
    throw SequencingError("input at " + std::to_string(ts) + " ms is older than " +
                          std::to_string(*last_ts_) + " ms");
  }
}

void CameraPipeline::open_interval(std::int64_t ts) {
  if (interval_start_) return;
  interval_start_ = floor_to(ts, config_.aggregation_ms);
  current_ = MinuteAggregate{};
  current_.camera_id = camera_.camera_id;
  current_.minute_start_ts = *interval_start_;
  pl_sum_ = 0.0;
}

MinuteAggregate CameraPipeline::close_interval() {
  MinuteAggregate agg = std::move(current_);
  if (agg.queue_samples > 0) {
    agg.mean_pl = pl_sum_ / static_cast<double>(agg.queue_samples);
    if (thresholds_) {
      agg.severity = classify_severity(*agg.mean_pl, *thresholds_);
      status_.queue_severity = agg.severity;
    }
  }
  interval_start_.reset();
  current_ = MinuteAggregate{};
  pl_sum_ = 0.0;
  return agg;
}

PipelineOutput CameraPipeline::advance_to(std::int64_t ts) {
  PipelineOutput out;
  if (interval_start_ && ts >= *interval_start_ + config_.aggregation_ms) {
    out.closed.push_back(close_interval());
  }
  return out;
}

void CameraPipeline::refresh_thresholds(std::int64_t day) {
  if (config_.thresholds) return;
  if (threshold_day_ && *threshold_day_ == day) return;
  threshold_day_ = day;
  // Trailing history of whole days before `day`.
  const std::int64_t oldest = day - config_.history_days;
  while (!history_.empty() && day_index(history_.front().timestamp_ms) < oldest) {
    history_.pop_front();
  }
  std::vector<QueueSample> window;
  for (const auto& s : history_) {
    if (day_index(s.timestamp_ms) < day) window.push_back(s);
  }
  try {
    thresholds_ = compute_thresholds(window, config_.queue);
  } catch (const InsufficientDataError&) {
    // Keep the previous thresholds (or none) until enough history exists.
  }
}

void CameraPipeline::note_counts(const std::vector<CountRecord>& records) {
  for (const auto& r : records) {
    ++current_.counts[r.key];
    recent_counts_.push_back(r);
  }
}

void CameraPipeline::update_status(std::int64_t ts) {
  last_ts_ = ts;
  while (!recent_counts_.empty() && ts - recent_counts_.front().timestamp_ms >= kMsPerHour) {
    recent_counts_.pop_front();
  }
  status_.counts_last_hour.fill(0);
  for (const auto& r : recent_counts_) ++status_.counts_last_hour[index_of(r.key.class_label)];
  status_.last_update_ts = std::max(status_.last_update_ts.value_or(ts), ts);
  status_.active_anomalies = monitor_.active_anomalies();
  status_.road_type = monitor_.road_type();
  status_.stale = false;
}

PipelineOutput CameraPipeline::process_frame(const FrameDetections& frame) {
  check_order(frame.timestamp_ms);
  PipelineOutput out = advance_to(frame.timestamp_ms);
  open_interval(frame.timestamp_ms);
  const StepResult step =
      config_.dedup ? tracker_.step(dedup_detections(frame, config_.dedup_iou)) : tracker_.step(frame);
  out.alerts = monitor_.observe(frame, step);
  out.counts = counter_.step(step);
  tracker_.take_finished();  // reported tracks are not retained in streaming mode
  ++current_.frames;
  for (const auto& a : out.alerts) current_.anomalies.push_back({a.track_id, a.start_ts_ms});
  note_counts(out.counts);
  update_status(frame.timestamp_ms);
  return out;
}

PipelineOutput CameraPipeline::process_queue_sample(const QueueSample& sample) {
  check_order(sample.timestamp_ms);
  if (!(sample.pixel_length >= 0.0)) throw ValidationError("pixel_length must be >= 0");
  PipelineOutput out = advance_to(sample.timestamp_ms);
  refresh_thresholds(day_index(sample.timestamp_ms));
  open_interval(sample.timestamp_ms);
  pl_sum_ += sample.pixel_length;
  ++current_.queue_samples;
  history_.push_back(sample);
  update_status(sample.timestamp_ms);
  return out;
}

PipelineOutput CameraPipeline::finish() {
  PipelineOutput out;
  if (finished_) return out;
  if (last_ts_) {
    FrameDetections tail;
    tail.camera_id = camera_.camera_id;
    tail.timestamp_ms = *last_ts_;
    const StepResult step = tracker_.flush();
    out.alerts = monitor_.observe(tail, step);
    out.counts = counter_.step(step);
    tracker_.take_finished();
    auto more = monitor_.finish(*last_ts_);
    out.alerts.insert(out.alerts.end(), more.begin(), more.end());
    if (interval_start_) {
      for (const auto& a : out.alerts) current_.anomalies.push_back({a.track_id, a.start_ts_ms});
      note_counts(out.counts);
    }
    update_status(*last_ts_);
  }
  if (interval_start_) out.closed.push_back(close_interval());
  finished_ = true;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<MinuteAggregate> fold_aggregates(const std::vector<MinuteAggregate>& minutes,
                                             std::int64_t bucket_ms) {
  if (bucket_ms <= 0) throw ValidationError("bucket size must be > 0");
  std::vector<MinuteAggregate> out;
  std::vector<double> means;
  auto flush_means = [&]() {
    if (out.empty()) return;
    if (!means.empty()) {
      double sum = 0.0;
      for (double m : means) sum += m;
      out.back().mean_pl = sum / static_cast<double>(means.size());
    }
    means.clear();
  };
  for (const auto& m : minutes) {
    const std::int64_t bucket = floor_to(m.minute_start_ts, bucket_ms);
    if (out.empty() || out.back().minute_start_ts != bucket || out.back().camera_id != m.camera_id) {
      flush_means();
      MinuteAggregate fresh;
      fresh.camera_id = m.camera_id;
      fresh.minute_start_ts = bucket;
      out.push_back(std::move(fresh));
    }
    auto& b = out.back();
    if (m.mean_pl) means.push_back(*m.mean_pl);
    if (m.severity && (!b.severity || *m.severity > *b.severity)) b.severity = m.severity;
    for (const auto& [k, n] : m.counts) b.counts[k] += n;
    b.anomalies.insert(b.anomalies.end(), m.anomalies.begin(), m.anomalies.end());
    b.frames += m.frames;
    b.queue_samples += m.queue_samples;
  }
  flush_means();
  return out;
}

codec::json codec::to_json(const MinuteAggregate& a) {
  json counts = json::array();
  for (const auto& [k, n] : a.counts) {
    counts.push_back({{"line", k.line},
                      {"cls", std::string(to_string(k.class_label))},
                      {"dir", std::string(1, sign_char(k.sign))},
                      {"count", n}});
  }
  json anomalies = json::array();
  for (const auto& r : a.anomalies) {
    anomalies.push_back({{"track", r.track_id}, {"start_ts_ms", r.start_ts_ms}});
  }
  return json{{"cam", a.camera_id},
              {"minute_start_ts", a.minute_start_ts},
              {"mean_pl", a.mean_pl ? json(*a.mean_pl) : json()},
              {"severity", a.severity ? json(std::string(to_string(*a.severity))) : json()},
              {"counts", counts},
              {"anomalies", anomalies},
              {"frames", a.frames},
              {"queue_samples", a.queue_samples}};
}

MinuteAggregate codec::aggregate_from_json(const json& j) {
  MinuteAggregate a;
  a.camera_id = require(j, "cam").get<std::string>();
  a.minute_start_ts = require(j, "minute_start_ts").get<std::int64_t>();
  if (auto it = j.find("mean_pl"); it != j.end() && !it->is_null()) a.mean_pl = it->get<double>();
  if (auto it = j.find("severity"); it != j.end() && !it->is_null()) {
    a.severity = parse_severity(it->get<std::string>());
  }
  if (auto it = j.find("counts"); it != j.end()) {
    for (const auto& c : *it) {
      const auto dir = require(c, "dir").get<std::string>();
      const CountKey key{require(c, "line").get<std::string>(),
                         parse_class_label(require(c, "cls").get<std::string>()),
                         dir == "-" ? CrossingSign::kNegative : CrossingSign::kPositive};
      a.counts[key] += require(c, "count").get<std::int64_t>();
    }
  }
  if (auto it = j.find("anomalies"); it != j.end()) {
    for (const auto& r : *it) {
      a.anomalies.push_back({require(r, "track").get<std::int64_t>(),
                             require(r, "start_ts_ms").get<std::int64_t>()});
    }
  }
  a.frames = j.value("frames", std::int64_t{0});
  a.queue_samples = j.value("queue_samples", std::int64_t{0});
  return a;
}

std::string minute_aggregate_json(const MinuteAggregate& agg) { return codec::to_json(agg).dump(); }

MinuteAggregate parse_minute_aggregate(std::string_view line) {
  try {
    return codec::aggregate_from_json(codec::json::parse(line));
  } catch (const codec::json::exception& e) {
    throw ParseError(0, std::string("aggregate: ") + e.what());
  }
}

codec::json codec::to_json(const CameraStatus& s) {
  json counts = json::object();
  for (const auto cls : kAllClasses) counts[std::string(to_string(cls))] = s.counts_last_hour[index_of(cls)];
  return json{{"camera_id", s.camera_id},
              {"last_update_ts", s.last_update_ts ? json(*s.last_update_ts) : json()},
              {"queue_severity",
               s.queue_severity ? json(std::string(to_string(*s.queue_severity))) : json("unknown")},
              {"active_anomalies", s.active_anomalies},
              {"counts_last_hour", counts},
              {"weather_tag", std::string(to_string(s.weather_tag))},
              {"road_type", std::string(to_string(s.road_type))},
              {"stale", s.stale}};
}

std::string camera_status_json(const CameraStatus& status) { return codec::to_json(status).dump(); }

}  // namespace trafficmon
