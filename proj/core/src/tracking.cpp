#include "trafficmon/tracking.hpp"

#include <algorithm>
#include <numeric>

#include "trafficmon/errors.hpp"

namespace trafficmon {

void validate(const IouTrackerConfig& cfg) {
  if (!(cfg.sigma_iou > 0.0 && cfg.sigma_iou <= 1.0)) {
    throw ValidationError("sigma_iou must be in (0, 1]");
  }
  if (!(cfg.sigma_l >= 0.0 && cfg.sigma_l <= 1.0) || !(cfg.sigma_h >= 0.0 && cfg.sigma_h <= 1.0)) {
    throw ValidationError("sigma_l and sigma_h must be in [0, 1]");
  }
  if (cfg.sigma_l > cfg.sigma_h) throw ValidationError("sigma_l must not exceed sigma_h");
  if (cfg.t_min < 1) throw ValidationError("t_min must be >= 1");
}

void validate(const FeatureTrackerConfig& cfg) {
  if (!(cfg.max_cosine_distance > 0.0 && cfg.max_cosine_distance <= 2.0)) {
    throw ValidationError("max_cosine_distance must be in (0, 2]");
  }
  if (!(cfg.iou_gate >= 0.0 && cfg.iou_gate <= 1.0)) {
    throw ValidationError("iou_gate must be in [0, 1]");
  }
  if (cfg.max_age_frames < 1) throw ValidationError("max_age_frames must be >= 1");
  if (cfg.min_length < 1) throw ValidationError("min_length must be >= 1");
}

namespace {

void check_sequence(const TrackerState& state, const FrameDetections& frame) {
  if (state.last_frame_index && frame.frame_index <= *state.last_frame_index) {
    throw SequencingError("frame " + std::to_string(frame.frame_index) +
                          " does not follow frame " + std::to_string(*state.last_frame_index));
  }
}

// Moves active_tracks[i] to the finished list (if reported) and records the
// event. Caller erases the hole.
void finish_track(TrackerState& state, Track& track, bool reported, StepResult& out) {
  TrackEvent ev;
  ev.track_id = track.track_id;
  ev.state = TrackState::kFinished;
  ev.kind = reported ? TrackEvent::Kind::kFinished : TrackEvent::Kind::kDiscarded;
  out.events.push_back(std::move(ev));
  if (reported) {
    track.state = TrackState::kFinished;
    state.finished_tracks.push_back(std::move(track));
  }
}

bool iou_reportable(const Track& t, const IouTrackerConfig& cfg) {
  return static_cast<int>(t.detections.size()) >= cfg.t_min && t.max_score() >= cfg.sigma_h;
}

void push_update(StepResult& out, const Track& t) {
  TrackEvent ev;
  ev.kind = TrackEvent::Kind::kUpdated;
  ev.track_id = t.track_id;
  ev.state = t.state;
  ev.detection = t.detections.back();
  out.events.push_back(std::move(ev));
}

void remove_finished(TrackerState& state, const std::vector<bool>& done) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < state.active_tracks.size(); ++i) {
    if (!done[i]) {
      if (w != i) state.active_tracks[w] = std::move(state.active_tracks[i]);
      ++w;
    }
  }
  state.active_tracks.resize(w);
}

}  // namespace

StepResult iou_tracker_step(TrackerState& state, const FrameDetections& frame,
                            const IouTrackerConfig& cfg) {
  check_sequence(state, frame);
  StepResult out;
  // No gap bridging: a skipped frame had no detections for anyone.
  if (state.last_frame_index && frame.frame_index > *state.last_frame_index + 1 &&
      !state.active_tracks.empty()) {
    auto flushed = iou_tracker_flush(state, cfg);
    out.events = std::move(flushed.events);
  }
  state.last_frame_index = frame.frame_index;

  const auto& dets = frame.detections;
  auto& tracks = state.active_tracks;

  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = tracks[a].last().score, sb = tracks[b].last().score;
    if (sa != sb) return sa > sb;
    return tracks[a].track_id < tracks[b].track_id;
  });

  std::vector<bool> claimed(dets.size(), false);
  std::vector<bool> done(tracks.size(), false);
  for (std::size_t ti : order) {
    Track& t = tracks[ti];
    const BoundingBox& last = t.last().box;
    std::size_t best = dets.size();
    double best_iou = -1.0;
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (claimed[j]) continue;
      const double v = iou_unchecked(last, dets[j].box);
      if (v > best_iou) {
        best_iou = v;
        best = j;
      }
    }
    if (best < dets.size() && best_iou >= cfg.sigma_iou) {
      claimed[best] = true;
      t.detections.push_back(dets[best]);
      if (t.state == TrackState::kTentative && iou_reportable(t, cfg)) {
        t.state = TrackState::kActive;
      }
      push_update(out, t);
    } else {
      done[ti] = true;
      finish_track(state, t, iou_reportable(t, cfg), out);
    }
  }
  remove_finished(state, done);

  for (std::size_t j = 0; j < dets.size(); ++j) {
    if (claimed[j] || dets[j].score < cfg.sigma_l) continue;
    Track t;
    t.track_id = state.next_id++;
    t.detections.push_back(dets[j]);
    t.state = iou_reportable(t, cfg) ? TrackState::kActive : TrackState::kTentative;
    push_update(out, t);
    tracks.push_back(std::move(t));
  }
  return out;
}

StepResult iou_tracker_flush(TrackerState& state, const IouTrackerConfig& cfg) {
  StepResult out;
  std::sort(state.active_tracks.begin(), state.active_tracks.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  for (auto& t : state.active_tracks) finish_track(state, t, iou_reportable(t, cfg), out);
  state.active_tracks.clear();
  return out;
}

StepResult feature_tracker_step(TrackerState& state, const FrameDetections& frame,
                                const FeatureTrackerConfig& cfg) {
  check_sequence(state, frame);
  const auto& dets = frame.detections;
  for (const auto& d : dets) {
    if (!d.embedding || d.embedding->empty()) {
      throw InvalidInputError("feature tracker: detection in frame " +
                              std::to_string(frame.frame_index) + " has no embedding");
    }
  }
  state.last_frame_index = frame.frame_index;
  StepResult out;
  auto& tracks = state.active_tracks;

  struct Pair {
    double distance;
    std::int64_t track_id;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    const Detection& last = tracks[ti].last();
    for (std::size_t j = 0; j < dets.size(); ++j) {
      const double cd = cosine_distance(*last.embedding, *dets[j].embedding);
      if (cd > cfg.max_cosine_distance) continue;
      if (iou_unchecked(last.box, dets[j].box) < cfg.iou_gate) continue;
      pairs.push_back({cd, tracks[ti].track_id, ti, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.det < b.det;
  });

  std::vector<bool> claimed(dets.size(), false);
  std::vector<std::size_t> det_for_track(tracks.size(), dets.size());
  for (const auto& p : pairs) {
    if (claimed[p.det] || det_for_track[p.track] != dets.size()) continue;
    claimed[p.det] = true;
    det_for_track[p.track] = p.det;
  }

  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return tracks[a].track_id < tracks[b].track_id; });

  std::vector<bool> done(tracks.size(), false);
  for (std::size_t ti : order) {
    Track& t = tracks[ti];
    if (det_for_track[ti] < dets.size()) {
      t.detections.push_back(dets[det_for_track[ti]]);
      if (t.state == TrackState::kTentative &&
          static_cast<int>(t.detections.size()) >= cfg.min_length) {
        t.state = TrackState::kActive;
      }
      push_update(out, t);
    } else if (frame.frame_index - t.last_frame() > cfg.max_age_frames) {
      done[ti] = true;
      finish_track(state, t, static_cast<int>(t.detections.size()) >= cfg.min_length, out);
    }
  }
  remove_finished(state, done);

  for (std::size_t j = 0; j < dets.size(); ++j) {
    if (claimed[j]) continue;
    Track t;
    t.track_id = state.next_id++;
    t.detections.push_back(dets[j]);
    t.state = cfg.min_length <= 1 ? TrackState::kActive : TrackState::kTentative;
    push_update(out, t);
    tracks.push_back(std::move(t));
  }
  return out;
}

StepResult feature_tracker_flush(TrackerState& state) {
  StepResult out;
  std::sort(state.active_tracks.begin(), state.active_tracks.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  for (auto& t : state.active_tracks) {
    finish_track(state, t, t.state != TrackState::kTentative, out);
  }
  state.active_tracks.clear();
  return out;
}

StepResult Tracker::step(const FrameDetections& frame) {
  return kind_ == TrackerKind::kIou ? iou_tracker_step(state_, frame, iou_cfg_)
                                    : feature_tracker_step(state_, frame, feature_cfg_);
}

StepResult Tracker::flush() {
  return kind_ == TrackerKind::kIou ? iou_tracker_flush(state_, iou_cfg_)
                                    : feature_tracker_flush(state_);
}

std::vector<Track> Tracker::take_finished() {
  std::vector<Track> out = std::move(state_.finished_tracks);
  state_.finished_tracks.clear();
  return out;
}

std::vector<Track> run_tracker(const std::vector<FrameDetections>& frames, Tracker tracker) {
  for (const auto& f : frames) tracker.step(f);
  tracker.flush();
  auto tracks = tracker.take_finished();
  std::sort(tracks.begin(), tracks.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  return tracks;
}

}  // namespace trafficmon
