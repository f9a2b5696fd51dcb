#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/anomaly.hpp"
#include "trafficmon/counting.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/queue.hpp"
#include "trafficmon/tracking.hpp"

namespace trafficmon {

struct PipelineConfig {
  bool dedup = true;
  double dedup_iou = 0.5;
  TrackerKind tracker = TrackerKind::kIou;
  IouTrackerConfig iou;
  FeatureTrackerConfig feature;
  AnomalyMonitor::Options anomaly;
  ThresholdConfig queue;
  // Trailing days of PL history used to recompute thresholds each day.
  int history_days = 7;
  // Fixed thresholds; when set, history-based recomputation is disabled.
  std::optional<SeverityThresholds> thresholds;
  std::int64_t aggregation_ms = kMsPerMinute;
};

struct AnomalyRef {
  std::int64_t track_id = 0;
  std::int64_t start_ts_ms = 0;

  friend bool operator==(const AnomalyRef&, const AnomalyRef&) = default;
};

struct MinuteAggregate {
  std::string camera_id;
  std::int64_t minute_start_ts = 0;
  std::optional<double> mean_pl;
  std::optional<SeverityLevel> severity;
  std::map<CountKey, std::int64_t> counts;
  std::vector<AnomalyRef> anomalies;  // confirmed during this minute
  std::int64_t frames = 0;
  std::int64_t queue_samples = 0;

  friend bool operator==(const MinuteAggregate&, const MinuteAggregate&) = default;
};

// Folds consecutive records into buckets of bucket_ms: mean of the minute
// means, summed counts, highest severity, concatenated anomaly refs.
std::vector<MinuteAggregate> fold_aggregates(const std::vector<MinuteAggregate>& minutes,
                                             std::int64_t bucket_ms);

std::string minute_aggregate_json(const MinuteAggregate& agg);
MinuteAggregate parse_minute_aggregate(std::string_view line);

struct CameraStatus {
  std::string camera_id;
  std::optional<std::int64_t> last_update_ts;
  std::optional<SeverityLevel> queue_severity;  // nullopt = unknown
  std::size_t active_anomalies = 0;
  std::array<std::int64_t, kNumClasses> counts_last_hour{};
  WeatherTag weather_tag = WeatherTag::kClear;
  RoadType road_type = RoadType::kFreeway;
  bool stale = false;

  friend bool operator==(const CameraStatus&, const CameraStatus&) = default;
};

std::string camera_status_json(const CameraStatus& status);

struct PipelineOutput {
  std::vector<AnomalyEvent> alerts;
  std::vector<CountRecord> counts;
  std::vector<MinuteAggregate> closed;

  void append(PipelineOutput&& other);
};

// One camera: dedup -> tracker -> {anomaly monitor, line counter}, plus
// queue samples -> severity, rolled up per aggregation interval. Inputs must
// arrive in non-decreasing timestamp order.
class CameraPipeline {
 public:
  CameraPipeline(CameraRecord camera, PipelineConfig config);

  PipelineOutput process_frame(const FrameDetections& frame);
  PipelineOutput process_queue_sample(const QueueSample& sample);
  // Closes every interval that ends at or before ts_ms.
  PipelineOutput advance_to(std::int64_t ts_ms);
  // Flushes the tracker, closes open candidates and the current interval.
  PipelineOutput finish();

  const CameraStatus& status() const { return status_; }
  void set_stale(bool stale) { status_.stale = stale; }
  const CameraRecord& camera() const { return camera_; }
  const std::optional<SeverityThresholds>& thresholds() const { return thresholds_; }
  const std::vector<AnomalyEvent>& anomaly_events() const { return monitor_.raw_events(); }
  const CountTally& tally() const { return counter_.tally(); }

 private:
  void check_order(std::int64_t ts_ms) const;
  void open_interval(std::int64_t ts_ms);
  MinuteAggregate close_interval();
  void refresh_thresholds(std::int64_t day);
  void note_counts(const std::vector<CountRecord>& records);
  void update_status(std::int64_t ts_ms);

  CameraRecord camera_;
  PipelineConfig config_;
  Tracker tracker_;
  AnomalyMonitor monitor_;
  LineCounter counter_;
  CameraStatus status_;
  std::optional<SeverityThresholds> thresholds_;
  std::optional<std::int64_t> threshold_day_;
  std::deque<QueueSample> history_;
  std::deque<CountRecord> recent_counts_;
  std::optional<std::int64_t> last_ts_;
  bool finished_ = false;

  // Open interval.
  std::optional<std::int64_t> interval_start_;
  double pl_sum_ = 0.0;
  MinuteAggregate current_;
};

}  // namespace trafficmon
