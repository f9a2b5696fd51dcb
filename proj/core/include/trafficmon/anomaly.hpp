#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trafficmon/ingest.hpp"
#include "trafficmon/motion.hpp"
#include "trafficmon/tracking.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

enum class IntersectionPolicy : std::uint8_t { kReject, kConfirm60s };

std::string_view to_string(IntersectionPolicy policy);
IntersectionPolicy parse_intersection_policy(std::string_view text);

struct AnomalyConfig {
  // A vehicle is a candidate once its speed stays *below* this for
  // candidate_window_s.
  double candidate_speed_px_s = 0.5;
  double candidate_window_s = 15.0;
  double confirm_freeway_s = 30.0;
  double confirm_intersection_s = 60.0;
  IntersectionPolicy intersection_policy = IntersectionPolicy::kReject;
  double merge_radius_px = 50.0;
  double one_per_side_window_min = 15.0;
  // Speed sampling used by AnomalyMonitor: one sample per track every
  // sample_period_s, each over a trailing speed_window_s.
  double sample_period_s = 1.0;
  double speed_window_s = 1.0;
};

void validate(const AnomalyConfig& cfg);

enum class AnomalyStatus : std::uint8_t { kCandidate, kConfirmed, kRejected };
enum class RejectionReason : std::uint8_t { kFrozenFrame, kIntersection, kMerged, kZeroSpeed };

std::string_view to_string(AnomalyStatus status);
AnomalyStatus parse_anomaly_status(std::string_view text);
std::string_view to_string(RejectionReason reason);
RejectionReason parse_rejection_reason(std::string_view text);

struct AnomalyEvent {
  std::string camera_id;
  std::int64_t track_id = 0;
  Point location;
  std::optional<Direction> direction;
  std::int64_t start_ts_ms = 0;
  std::optional<std::int64_t> end_ts_ms;
  AnomalyStatus status = AnomalyStatus::kCandidate;
  // While status is kCandidate this holds a pending frozen_frame/zero_speed
  // flag; confirm() turns a flagged candidate into a rejection.
  std::optional<RejectionReason> rejection_reason;
  std::optional<std::int64_t> confirmed_ts_ms;

  std::int64_t duration_ms(std::int64_t as_of_ts_ms) const {
    return end_ts_ms.value_or(as_of_ts_ms) - start_ts_ms;
  }

  friend bool operator==(const AnomalyEvent&, const AnomalyEvent&) = default;
};

// One speed observation for one track.
struct SpeedSample {
  std::int64_t track_id = 0;
  std::int64_t timestamp_ms = 0;
  double speed_px_s = 0.0;
  Point location;
  std::optional<Direction> direction;
  // True when every frame in the sample's window carried the same digest;
  // nullopt when digests are unavailable.
  std::optional<bool> digest_unchanged;
};

// Stateful candidate opener/closer fed with time-ordered speed samples.
class CandidateDetector {
 public:
  CandidateDetector(std::string camera_id, AnomalyConfig cfg);

  // Returns the index (into events()) of the candidate this sample opened,
  // if any.
  std::optional<std::size_t> observe(const SpeedSample& sample);
  // Closes the open candidate of a track that ended.
  void close_track(std::int64_t track_id, std::int64_t end_ts_ms);
  void close_all(std::int64_t end_ts_ms);

  std::optional<std::size_t> open_event(std::int64_t track_id) const;
  std::vector<AnomalyEvent>& events() { return events_; }
  const std::vector<AnomalyEvent>& events() const { return events_; }

 private:
  struct Run {
    std::int64_t start_ts_ms = 0;
    Point location;
    bool all_zero = true;
    bool all_frozen = true;
    bool no_digest_info = true;
    std::optional<std::size_t> event;
  };
  void refresh_flag(const Run& run);

  std::string camera_id_;
  AnomalyConfig cfg_;
  std::unordered_map<std::int64_t, Run> runs_;
  std::vector<AnomalyEvent> events_;
};

// Opens a candidate when a track's speed stays below candidate_speed_px_s
// for at least candidate_window_s; closes it when speed rises again.
// Candidates whose whole run is exact-zero speed are flagged frozen_frame
// (digest unchanged throughout) or zero_speed (no digest information).
std::vector<AnomalyEvent> update_candidates(const std::vector<SpeedSample>& samples,
                                            const AnomalyConfig& cfg,
                                            const std::string& camera_id = {});

// Applies the road-type rule to a candidate as of as_of_ts_ms (ignored when
// the candidate is closed). Non-candidates are returned unchanged.
AnomalyEvent confirm(const AnomalyEvent& candidate, RoadType road, const AnomalyConfig& cfg,
                     std::int64_t as_of_ts_ms);

// Post-processing over one camera's events: drops frozen/zero-speed events,
// merges confirmed events within merge_radius_px (and within the one-per-side
// window) into the earliest, then keeps only the earliest confirmed event
// per direction per one-per-side window. Absorbed events stay in the output
// as rejected(merged). Output is sorted by (start, track_id).
std::vector<AnomalyEvent> suppress_and_merge(std::vector<AnomalyEvent> events,
                                             const AnomalyConfig& cfg);

// Per-camera streaming detector: consumes tracker output frame by frame,
// samples speeds, drives a CandidateDetector and confirms candidates
// against the current road type.
class AnomalyMonitor {
 public:
  struct Options {
    AnomalyConfig anomaly;
    MotionConfig motion;
    std::optional<RoadType> road_type_override;
    // Look-back for the direction histogram behind road classification.
    double road_horizon_min = 15.0;
  };

  AnomalyMonitor(std::string camera_id, Options options);

  // Returns events confirmed during this frame (alerts).
  std::vector<AnomalyEvent> observe(const FrameDetections& frame, const StepResult& step);
  // Closes every open candidate and runs a final confirmation pass.
  std::vector<AnomalyEvent> finish(std::int64_t end_ts_ms);

  RoadType road_type() const;
  const DirectionHistogram& histogram() const { return histogram_; }
  const std::vector<AnomalyEvent>& raw_events() const { return detector_.events(); }
  std::vector<AnomalyEvent> final_events() const;
  // Confirmed events without an end time.
  std::size_t active_anomalies() const;

 private:
  struct TrackMotion {
    std::deque<TimedPoint> history;
    Point first_position;
    std::optional<std::int64_t> last_sample_ts;
  };
  std::optional<bool> digest_unchanged(std::int64_t ts_ms) const;
  std::optional<AnomalyEvent> try_confirm(std::size_t index, std::int64_t as_of_ts_ms);
  void expire_histogram(std::int64_t now_ms);

  std::string camera_id_;
  Options options_;
  CandidateDetector detector_;
  std::unordered_map<std::int64_t, TrackMotion> tracks_;
  std::deque<std::pair<std::int64_t, std::optional<std::uint64_t>>> digests_;
  DirectionHistogram histogram_;
  std::deque<std::pair<std::int64_t, Direction>> finished_directions_;
};

struct AnomalyRunOptions {
  AnomalyMonitor::Options monitor;
  IouTrackerConfig tracker;
  bool dedup = true;
  double dedup_iou = 0.5;
};

struct AnomalyReport {
  RoadType road_type = RoadType::kFreeway;
  std::vector<AnomalyEvent> events;
};

// Batch run over one camera's frames. Without an override the road type is
// classified from every reported track of a first tracking pass.
AnomalyReport detect_anomalies(const std::vector<FrameDetections>& frames,
                               const std::string& camera_id, const AnomalyRunOptions& options);

// One JSON object per line with every AnomalyEvent field.
std::string format_anomaly_event(const AnomalyEvent& event);
std::vector<AnomalyEvent> parse_anomaly_events(std::string_view text);

}  // namespace trafficmon
