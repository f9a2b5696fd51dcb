#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trafficmon/ingest.hpp"
#include "trafficmon/tracking.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

// Greedy same-class suppression: detections are visited by descending score
// (ties by input order) and a detection is dropped when its IOU with an
// already kept detection of the same class exceeds iou_threshold. Survivors
// keep their input order.
FrameDetections dedup_detections(const FrameDetections& frame, double iou_threshold = 0.5);

// +1 when a track crosses from the non-positive to the positive side of a
// line, -1 the other way.
enum class CrossingSign : std::int8_t { kNegative = -1, kPositive = 1 };

char sign_char(CrossingSign sign);

struct CountKey {
  std::string line;
  ClassLabel class_label = ClassLabel::kCar;
  CrossingSign sign = CrossingSign::kPositive;

  friend auto operator<=>(const CountKey&, const CountKey&) = default;
};

struct CountRecord {
  CountKey key;
  std::int64_t track_id = 0;
  std::int64_t timestamp_ms = 0;
};

class CountTally {
 public:
  std::int64_t count(const std::string& line, ClassLabel cls, CrossingSign sign) const;
  // All classes and both signs.
  std::int64_t line_total(const std::string& line) const;
  std::int64_t line_total(const std::string& line, CrossingSign sign) const;
  bool counted(const std::string& line, std::int64_t track_id) const;

  const std::map<CountKey, std::int64_t>& totals() const { return totals_; }
  // Every increment in the order it happened.
  const std::vector<CountRecord>& records() const { return records_; }

  void add(const CountKey& key, std::int64_t track_id, std::int64_t timestamp_ms);

 private:
  std::map<CountKey, std::int64_t> totals_;
  std::map<std::string, std::set<std::int64_t>> counted_;
  std::vector<CountRecord> records_;
};

// Side-aware segment/line test. Returns the sign when the segment a->b
// touches or crosses the counting line segment and changes side (touching an
// endpoint counts); nullopt otherwise.
std::optional<CrossingSign> segment_crossing(Point a, Point b, const CountingLine& line);

// Consumes tracker events and increments the tally whenever an active
// track's consecutive centroids cross a line. Each track counts at most once
// per line. Tentative tracks are buffered until they become active and
// dropped if discarded.
class LineCounter {
 public:
  explicit LineCounter(std::vector<CountingLine> lines);

  // Returns the records added by this step.
  std::vector<CountRecord> step(const StepResult& events);

  const CountTally& tally() const { return tally_; }
  const std::vector<CountingLine>& lines() const { return lines_; }

 private:
  struct Pending {
    std::vector<std::pair<std::int64_t, Point>> centroids;  // (ts, centroid)
    std::array<std::int64_t, kNumClasses> votes{};
    std::size_t processed = 1;  // centroids already scanned as segment ends
    bool active = false;
  };
  void scan(std::int64_t track_id, Pending& p, std::vector<CountRecord>& out);

  std::vector<CountingLine> lines_;
  CountTally tally_;
  std::unordered_map<std::int64_t, Pending> tracks_;
};

// Counts for complete tracks (each consecutive centroid pair is a segment).
CountTally count_tracks(std::span<const Track> tracks, std::span<const CountingLine> lines);

// 100 * detected / ground_truth. Throws UndefinedMetricError when
// ground_truth == 0.
double count_percentage(std::int64_t detected, std::int64_t ground_truth);

// CSV rows "line,class,direction,window_start,count" with direction "+"/"-"
// and window_start in ms, windows aligned to multiples of window_ms.
std::string format_count_csv(const CountTally& tally, std::int64_t window_ms = 60000);

struct CountCsvRow {
  std::string line;
  ClassLabel class_label = ClassLabel::kCar;
  CrossingSign sign = CrossingSign::kPositive;
  std::int64_t window_start_ms = 0;
  std::int64_t count = 0;
};

std::vector<CountCsvRow> parse_count_csv(std::string_view text);

}  // namespace trafficmon
