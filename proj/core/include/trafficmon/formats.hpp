#pragma once

// Line-oriented files shared by the CLI, evaluation and golden tests: the
// track dump and the simulator ground truth.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trafficmon/anomaly.hpp"
#include "trafficmon/counting.hpp"
#include "trafficmon/queue.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

struct CameraTracks {
  std::string camera_id;
  std::vector<Track> tracks;
};

// One line per (track, frame): {"cam","track","frame","ts_ms","box","cls","score"}.
// Tracks in id order, detections in frame order.
std::string format_track_dump(const std::string& camera_id, std::span<const Track> tracks);
// Groups lines by camera (cameras in first-seen order) and track id.
std::vector<CameraTracks> parse_track_dump(std::string_view text);

struct CountTruth {
  std::string line;
  ClassLabel class_label = ClassLabel::kCar;
  CrossingSign sign = CrossingSign::kPositive;
  std::int64_t count = 0;

  friend bool operator==(const CountTruth&, const CountTruth&) = default;
};

struct TimeWindow {
  std::int64_t start_ts_ms = 0;
  std::int64_t end_ts_ms = 0;

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// Exact answers for one camera. Every line carries a "type" field:
// track | count | anomaly | queue | frozen.
struct GroundTruth {
  std::string camera_id;
  std::vector<Track> tracks;
  std::vector<CountTruth> counts;
  std::vector<AnomalyEvent> anomalies;
  std::vector<QueueSample> queue;
  std::vector<TimeWindow> frozen_windows;

  std::int64_t line_total(const std::string& line) const;
};

std::string format_ground_truth(const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view text);

}  // namespace trafficmon
