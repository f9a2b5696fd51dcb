#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trafficmon/ingest.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

struct IouTrackerConfig {
  double sigma_iou = 0.5;  // match gate
  double sigma_l = 0.3;    // minimum score to open a track
  double sigma_h = 0.5;    // a reported track must reach this score once
  int t_min = 2;           // minimum reported track length, frames
};

void validate(const IouTrackerConfig& cfg);

struct FeatureTrackerConfig {
  double max_cosine_distance = 0.3;
  double iou_gate = 0.1;
  int max_age_frames = 30;
  int min_length = 2;  // shorter tracks are discarded when they finish
};

void validate(const FeatureTrackerConfig& cfg);

struct TrackerState {
  std::vector<Track> active_tracks;
  std::vector<Track> finished_tracks;
  std::int64_t next_id = 1;
  std::optional<std::int64_t> last_frame_index;
};

// What happened to one track during one step. kUpdated events carry the
// detection just appended (new tracks included); kFinished means the track
// ended and passed the reporting filters; kDiscarded means it ended and did
// not.
struct TrackEvent {
  enum class Kind : std::uint8_t { kUpdated, kFinished, kDiscarded };
  Kind kind = Kind::kUpdated;
  std::int64_t track_id = 0;
  TrackState state = TrackState::kTentative;
  std::optional<Detection> detection;
};

struct StepResult {
  std::vector<TrackEvent> events;
};

// Greedy best-IOU association. Tracks are visited by descending last-box
// score (ties by track_id); each takes the unclaimed detection with the
// highest IOU to its last box if that IOU >= sigma_iou, ties by detection
// input order. Unmatched tracks finish at once. Throws SequencingError if
// frame.frame_index does not exceed the previous frame.
StepResult iou_tracker_step(TrackerState& state, const FrameDetections& frame,
                            const IouTrackerConfig& cfg);

// Appearance association: greedy by ascending cosine distance among pairs
// that pass both the cosine and the IOU gate. Unmatched tracks survive
// max_age_frames frames before finishing. Throws InvalidInputError when a
// detection has no embedding.
StepResult feature_tracker_step(TrackerState& state, const FrameDetections& frame,
                                const FeatureTrackerConfig& cfg);

// Ends every active track (end of stream).
StepResult iou_tracker_flush(TrackerState& state, const IouTrackerConfig& cfg);
StepResult feature_tracker_flush(TrackerState& state);

enum class TrackerKind : std::uint8_t { kIou, kFeature };

// Owns a TrackerState and dispatches to the selected algorithm.
class Tracker {
 public:
  explicit Tracker(IouTrackerConfig cfg) : kind_(TrackerKind::kIou), iou_cfg_(cfg) {
    validate(iou_cfg_);
  }
  explicit Tracker(FeatureTrackerConfig cfg)
      : kind_(TrackerKind::kFeature), feature_cfg_(cfg) {
    validate(feature_cfg_);
  }

  StepResult step(const FrameDetections& frame);
  StepResult flush();

  TrackerKind kind() const { return kind_; }
  const TrackerState& state() const { return state_; }
  // Moves out the reported tracks accumulated so far.
  std::vector<Track> take_finished();

 private:
  TrackerKind kind_;
  IouTrackerConfig iou_cfg_;
  FeatureTrackerConfig feature_cfg_;
  TrackerState state_;
};

// Batch helper: runs a tracker over one camera's frames (in order) and
// returns all reported tracks sorted by track_id.
std::vector<Track> run_tracker(const std::vector<FrameDetections>& frames, Tracker tracker);

}  // namespace trafficmon
