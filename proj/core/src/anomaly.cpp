#include "trafficmon/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json_codec.hpp"
#include "trafficmon/counting.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

namespace {

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

}  // namespace

std::string_view to_string(IntersectionPolicy policy) {
  return policy == IntersectionPolicy::kReject ? "reject" : "confirm_60s";
}

IntersectionPolicy parse_intersection_policy(std::string_view text) {
  if (text == "reject") return IntersectionPolicy::kReject;
  if (text == "confirm_60s") return IntersectionPolicy::kConfirm60s;
  throw ValidationError("unknown intersection policy '" + std::string(text) + "'");
}

std::string_view to_string(AnomalyStatus status) {
  switch (status) {
    case AnomalyStatus::kCandidate: return "candidate";
    case AnomalyStatus::kConfirmed: return "confirmed";
    case AnomalyStatus::kRejected: return "rejected";
  }
  return "?";
}

AnomalyStatus parse_anomaly_status(std::string_view text) {
  if (text == "candidate") return AnomalyStatus::kCandidate;
  if (text == "confirmed") return AnomalyStatus::kConfirmed;
  if (text == "rejected") return AnomalyStatus::kRejected;
  throw ValidationError("unknown anomaly status '" + std::string(text) + "'");
}

std::string_view to_string(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::kFrozenFrame: return "frozen_frame";
    case RejectionReason::kIntersection: return "intersection";
    case RejectionReason::kMerged: return "merged";
    case RejectionReason::kZeroSpeed: return "zero_speed";
  }
  return "?";
}

RejectionReason parse_rejection_reason(std::string_view text) {
  if (text == "frozen_frame") return RejectionReason::kFrozenFrame;
  if (text == "intersection") return RejectionReason::kIntersection;
  if (text == "merged") return RejectionReason::kMerged;
  if (text == "zero_speed") return RejectionReason::kZeroSpeed;
  throw ValidationError("unknown rejection reason '" + std::string(text) + "'");
}

void validate(const AnomalyConfig& cfg) {
  if (!(cfg.candidate_window_s <= cfg.confirm_freeway_s &&
        cfg.confirm_freeway_s <= cfg.confirm_intersection_s)) {
    throw ValidationError(
        "anomaly windows must satisfy candidate <= freeway <= intersection");
  }
  if (!(cfg.candidate_speed_px_s > 0.0)) throw ValidationError("candidate speed must be > 0");
  if (!(cfg.sample_period_s > 0.0) || !(cfg.speed_window_s > 0.0)) {
    throw ValidationError("speed sampling period and window must be > 0");
  }
  if (cfg.merge_radius_px < 0.0 || cfg.one_per_side_window_min < 0.0) {
    throw ValidationError("merge radius and window must be non-negative");
  }
}

// ---------------------------------------------------------------------------
// CandidateDetector

CandidateDetector::CandidateDetector(std::string camera_id, AnomalyConfig cfg)
    : camera_id_(std::move(camera_id)), cfg_(cfg) {
  validate(cfg_);
}

void CandidateDetector::refresh_flag(const Run& run) {
  if (!run.event) return;
  auto& ev = events_[*run.event];
  if (ev.status != AnomalyStatus::kCandidate) return;
  if (run.all_zero && run.no_digest_info) {
    ev.rejection_reason = RejectionReason::kZeroSpeed;
  } else if (run.all_zero && run.all_frozen) {
    ev.rejection_reason = RejectionReason::kFrozenFrame;
  } else {
    ev.rejection_reason.reset();
  }
}

std::optional<std::size_t> CandidateDetector::observe(const SpeedSample& s) {
  auto it = runs_.find(s.track_id);
  if (s.speed_px_s >= cfg_.candidate_speed_px_s) {
    if (it != runs_.end()) {
      if (it->second.event) events_[*it->second.event].end_ts_ms = s.timestamp_ms;
      runs_.erase(it);
    }
    return std::nullopt;
  }

  if (it == runs_.end()) {
    Run run;
    run.start_ts_ms = s.timestamp_ms;
    run.location = s.location;
    it = runs_.emplace(s.track_id, run).first;
  }
  Run& run = it->second;
  run.all_zero = run.all_zero && s.speed_px_s == 0.0;
  run.all_frozen = run.all_frozen && s.digest_unchanged.value_or(false);
  run.no_digest_info = run.no_digest_info && !s.digest_unchanged.has_value();

  std::optional<std::size_t> opened;
  if (!run.event && s.timestamp_ms - run.start_ts_ms >= to_ms(cfg_.candidate_window_s)) {
    AnomalyEvent ev;
    ev.camera_id = camera_id_;
    ev.track_id = s.track_id;
    ev.location = run.location;
    ev.direction = s.direction;
    ev.start_ts_ms = run.start_ts_ms;
    ev.status = AnomalyStatus::kCandidate;
    events_.push_back(std::move(ev));
    run.event = events_.size() - 1;
    opened = run.event;
  }
  refresh_flag(run);
  return opened;
}

void CandidateDetector::close_track(std::int64_t track_id, std::int64_t end_ts_ms) {
  auto it = runs_.find(track_id);
  if (it == runs_.end()) return;
  if (it->second.event) {
    auto& ev = events_[*it->second.event];
    if (!ev.end_ts_ms) ev.end_ts_ms = end_ts_ms;
  }
  runs_.erase(it);
}

void CandidateDetector::close_all(std::int64_t end_ts_ms) {
  for (auto& [id, run] : runs_) {
    if (run.event && !events_[*run.event].end_ts_ms) events_[*run.event].end_ts_ms = end_ts_ms;
  }
  runs_.clear();
}

std::optional<std::size_t> CandidateDetector::open_event(std::int64_t track_id) const {
  auto it = runs_.find(track_id);
  if (it == runs_.end()) return std::nullopt;
  return it->second.event;
}

std::vector<AnomalyEvent> update_candidates(const std::vector<SpeedSample>& samples,
                                            const AnomalyConfig& cfg,
                                            const std::string& camera_id) {
  CandidateDetector detector(camera_id, cfg);
  for (const auto& s : samples) detector.observe(s);
  return detector.events();
}

AnomalyEvent confirm(const AnomalyEvent& candidate, RoadType road, const AnomalyConfig& cfg,
                     std::int64_t as_of_ts_ms) {
  AnomalyEvent out = candidate;
  if (out.status != AnomalyStatus::kCandidate) return out;
  if (out.rejection_reason) {
    out.status = AnomalyStatus::kRejected;
    return out;
  }
  std::int64_t threshold_ms = 0;
  if (road == RoadType::kFreeway) {
    threshold_ms = to_ms(cfg.confirm_freeway_s);
  } else if (cfg.intersection_policy == IntersectionPolicy::kReject) {
    out.status = AnomalyStatus::kRejected;
    out.rejection_reason = RejectionReason::kIntersection;
    return out;
  } else {
    threshold_ms = to_ms(cfg.confirm_intersection_s);
  }
  if (out.duration_ms(as_of_ts_ms) > threshold_ms) {
    out.status = AnomalyStatus::kConfirmed;
    out.confirmed_ts_ms = out.start_ts_ms + threshold_ms;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Post-processing

namespace {

bool event_order(const AnomalyEvent& a, const AnomalyEvent& b) {
  if (a.start_ts_ms != b.start_ts_ms) return a.start_ts_ms < b.start_ts_ms;
  return a.track_id < b.track_id;
}

bool close_to(const AnomalyEvent& a, const AnomalyEvent& b, const AnomalyConfig& cfg) {
  const double d = std::hypot(a.location.x - b.location.x, a.location.y - b.location.y);
  const std::int64_t dt = std::abs(a.start_ts_ms - b.start_ts_ms);
  return d <= cfg.merge_radius_px && dt <= to_ms(cfg.one_per_side_window_min * 60.0);
}

bool same_side_window(const AnomalyEvent& kept, const AnomalyEvent& later,
                      const AnomalyConfig& cfg) {
  return kept.direction == later.direction &&
         later.start_ts_ms - kept.start_ts_ms < to_ms(cfg.one_per_side_window_min * 60.0);
}

void mark_merged(AnomalyEvent& e) {
  e.status = AnomalyStatus::kRejected;
  e.rejection_reason = RejectionReason::kMerged;
}

}  // namespace

std::vector<AnomalyEvent> suppress_and_merge(std::vector<AnomalyEvent> events,
                                             const AnomalyConfig& cfg) {
  std::erase_if(events, [](const AnomalyEvent& e) {
    return e.rejection_reason == RejectionReason::kFrozenFrame ||
           e.rejection_reason == RejectionReason::kZeroSpeed;
  });
  std::stable_sort(events.begin(), events.end(), event_order);

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].status != AnomalyStatus::kConfirmed) continue;
    const bool absorbed = std::any_of(survivors.begin(), survivors.end(), [&](std::size_t s) {
      return close_to(events[s], events[i], cfg);
    });
    if (absorbed) {
      mark_merged(events[i]);
    } else {
      survivors.push_back(i);
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i : survivors) {
    const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return same_side_window(events[k], events[i], cfg);
    });
    if (shadowed) {
      mark_merged(events[i]);
    } else {
      kept.push_back(i);
    }
  }
  return events;
}

// ---------------------------------------------------------------------------
// AnomalyMonitor

AnomalyMonitor::AnomalyMonitor(std::string camera_id, Options options)
    : camera_id_(camera_id), options_(options), detector_(std::move(camera_id), options.anomaly) {}

RoadType AnomalyMonitor::road_type() const {
  if (options_.road_type_override) return *options_.road_type_override;
  return classify_road_type(histogram_, options_.motion);
}

void AnomalyMonitor::expire_histogram(std::int64_t now_ms) {
  const std::int64_t horizon = to_ms(options_.road_horizon_min * 60.0);
  while (!finished_directions_.empty() && now_ms - finished_directions_.front().first > horizon) {
    histogram_.remove(finished_directions_.front().second);
    finished_directions_.pop_front();
  }
}

std::optional<bool> AnomalyMonitor::digest_unchanged(std::int64_t ts_ms) const {
  const std::int64_t window = to_ms(options_.anomaly.speed_window_s);
  std::optional<std::uint64_t> ref;
  bool any = false;
  for (auto it = digests_.rbegin(); it != digests_.rend(); ++it) {
    if (ts_ms - it->first > window) break;
    if (!it->second) return std::nullopt;
    if (!any) {
      ref = it->second;
      any = true;
    } else if (*it->second != *ref) {
      return false;
    }
  }
  if (!any) return std::nullopt;
  return true;
}

std::optional<AnomalyEvent> AnomalyMonitor::try_confirm(std::size_t index, std::int64_t as_of) {
  auto& events = detector_.events();
  AnomalyEvent& ev = events[index];
  if (ev.status != AnomalyStatus::kCandidate || ev.rejection_reason) return std::nullopt;
  AnomalyEvent updated = confirm(ev, road_type(), options_.anomaly, as_of);
  if (updated.status == AnomalyStatus::kRejected) {
    ev = updated;
    return std::nullopt;
  }
  if (updated.status != AnomalyStatus::kConfirmed) return std::nullopt;
  // Streaming form of suppress_and_merge: an event shadowed by an earlier
  // confirmed one never raises an alert.
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i == index || events[i].status != AnomalyStatus::kConfirmed) continue;
    if (close_to(events[i], updated, options_.anomaly) ||
        (events[i].start_ts_ms <= updated.start_ts_ms &&
         same_side_window(events[i], updated, options_.anomaly))) {
      mark_merged(updated);
      ev = updated;
      return std::nullopt;
    }
  }
  ev = updated;
  return ev;
}

std::vector<AnomalyEvent> AnomalyMonitor::observe(const FrameDetections& frame,
                                                  const StepResult& step) {
  const std::int64_t now = frame.timestamp_ms;
  const std::int64_t window = to_ms(options_.anomaly.speed_window_s);
  const std::int64_t period = to_ms(options_.anomaly.sample_period_s);

  digests_.emplace_back(now, frame.frame_digest);
  while (!digests_.empty() && now - digests_.front().first > window) digests_.pop_front();
  expire_histogram(now);

  std::vector<AnomalyEvent> alerts;
  for (const auto& ev : step.events) {
    if (ev.kind != TrackEvent::Kind::kUpdated) {
      auto it = tracks_.find(ev.track_id);
      if (it != tracks_.end()) {
        const std::int64_t end = it->second.history.empty()
                                     ? now
                                     : it->second.history.back().timestamp_ms;
        if (ev.kind == TrackEvent::Kind::kFinished && !it->second.history.empty()) {
          if (auto d = dominant_direction(it->second.first_position,
                                          it->second.history.back().position,
                                          options_.motion.min_displacement_px)) {
            histogram_.add(*d);
            finished_directions_.emplace_back(now, *d);
          }
        }
        if (auto idx = detector_.open_event(ev.track_id)) {
          if (auto a = try_confirm(*idx, end)) alerts.push_back(*a);
        }
        detector_.close_track(ev.track_id, end);
        tracks_.erase(it);
      }
      continue;
    }

    const Detection& det = *ev.detection;
    auto [it, inserted] = tracks_.try_emplace(ev.track_id);
    TrackMotion& tm = it->second;
    const Point c = det.box.center();
    if (inserted) tm.first_position = c;
    tm.history.push_back({det.timestamp_ms, c});
    while (tm.history.size() > 2 && det.timestamp_ms - tm.history[1].timestamp_ms >= window) {
      tm.history.pop_front();
    }

    const bool due = tm.last_sample_ts ? det.timestamp_ms - *tm.last_sample_ts >= period
                                       : det.timestamp_ms - tm.history.front().timestamp_ms >= window;
    if (!due) continue;
    SpeedSample s;
    s.track_id = ev.track_id;
    s.timestamp_ms = det.timestamp_ms;
    try {
      s.speed_px_s = estimate_speed(std::vector<TimedPoint>(tm.history.begin(), tm.history.end()),
                                    window);
    } catch (const InsufficientDataError&) {
      continue;
    }
    tm.last_sample_ts = det.timestamp_ms;
    s.location = c;
    s.direction = dominant_direction(tm.first_position, c, options_.motion.min_displacement_px);
    s.digest_unchanged = digest_unchanged(det.timestamp_ms);
    detector_.observe(s);
    if (auto idx = detector_.open_event(ev.track_id)) {
      if (auto a = try_confirm(*idx, det.timestamp_ms)) alerts.push_back(*a);
    }
  }
  return alerts;
}

std::vector<AnomalyEvent> AnomalyMonitor::finish(std::int64_t end_ts_ms) {
  std::vector<AnomalyEvent> alerts;
  auto& events = detector_.events();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!events[i].end_ts_ms && events[i].status == AnomalyStatus::kCandidate) {
      if (auto a = try_confirm(i, end_ts_ms)) alerts.push_back(*a);
    }
  }
  detector_.close_all(end_ts_ms);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].rejection_reason && events[i].status == AnomalyStatus::kCandidate) {
      events[i].status = AnomalyStatus::kRejected;
    }
  }
  tracks_.clear();
  return alerts;
}

std::vector<AnomalyEvent> AnomalyMonitor::final_events() const {
  return suppress_and_merge(detector_.events(), options_.anomaly);
}

std::size_t AnomalyMonitor::active_anomalies() const {
  std::size_t n = 0;
  for (const auto& e : detector_.events()) {
    if (e.status == AnomalyStatus::kConfirmed && !e.end_ts_ms) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Batch

AnomalyReport detect_anomalies(const std::vector<FrameDetections>& frames,
                               const std::string& camera_id, const AnomalyRunOptions& options) {
  auto prepare = [&](const FrameDetections& f) {
    return options.dedup ? dedup_detections(f, options.dedup_iou) : f;
  };

  AnomalyMonitor::Options mopts = options.monitor;
  if (!mopts.road_type_override) {
    Tracker pass1(options.tracker);
    for (const auto& f : frames) pass1.step(prepare(f));
    pass1.flush();
    const auto tracks = pass1.take_finished();
    mopts.road_type_override =
        classify_road_type(build_direction_histogram(tracks, mopts.motion.min_displacement_px),
                           mopts.motion);
  }

  AnomalyMonitor monitor(camera_id, mopts);
  Tracker tracker(options.tracker);
  std::int64_t last_ts = 0;
  for (const auto& f : frames) {
    const auto prepared = prepare(f);
    monitor.observe(prepared, tracker.step(prepared));
    last_ts = f.timestamp_ms;
  }
  FrameDetections tail;
  tail.camera_id = camera_id;
  tail.timestamp_ms = last_ts;
  monitor.observe(tail, tracker.flush());
  monitor.finish(last_ts);

  AnomalyReport report;
  report.road_type = *mopts.road_type_override;
  report.events = monitor.final_events();
  return report;
}

// ---------------------------------------------------------------------------
// Export

codec::json codec::to_json(const AnomalyEvent& e) {
  json j;
  j["cam"] = e.camera_id;
  j["track"] = e.track_id;
  j["location"] = json::array({e.location.x, e.location.y});
  j["direction"] = e.direction ? json(std::string(to_string(*e.direction))) : json();
  j["start_ts_ms"] = e.start_ts_ms;
  j["end_ts_ms"] = e.end_ts_ms ? json(*e.end_ts_ms) : json();
  j["status"] = std::string(to_string(e.status));
  j["rejection_reason"] =
      e.rejection_reason ? json(std::string(to_string(*e.rejection_reason))) : json();
  j["confirmed_ts_ms"] = e.confirmed_ts_ms ? json(*e.confirmed_ts_ms) : json();
  return j;
}

AnomalyEvent codec::anomaly_from_json(const json& j) {
  AnomalyEvent e;
  e.camera_id = j.value("cam", std::string());
  e.track_id = j.value("track", std::int64_t{0});
  if (auto it = j.find("location"); it != j.end() && it->is_array() && it->size() == 2) {
    e.location = {(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  if (auto it = j.find("direction"); it != j.end() && !it->is_null()) {
    e.direction = parse_direction(it->get<std::string>());
  }
  e.start_ts_ms = require(j, "start_ts_ms").get<std::int64_t>();
  if (auto it = j.find("end_ts_ms"); it != j.end() && !it->is_null()) {
    e.end_ts_ms = it->get<std::int64_t>();
  }
  e.status = parse_anomaly_status(j.value("status", std::string("confirmed")));
  if (auto it = j.find("rejection_reason"); it != j.end() && !it->is_null()) {
    e.rejection_reason = parse_rejection_reason(it->get<std::string>());
  }
  if (auto it = j.find("confirmed_ts_ms"); it != j.end() && !it->is_null()) {
    e.confirmed_ts_ms = it->get<std::int64_t>();
  }
  return e;
}

std::string format_anomaly_event(const AnomalyEvent& e) { return codec::to_json(e).dump(); }

std::vector<AnomalyEvent> parse_anomaly_events(std::string_view text) {
  std::vector<AnomalyEvent> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(codec::anomaly_from_json(codec::json::parse(line)));
    } catch (const codec::json::exception& ex) {
      throw ParseError(line_no, ex.what());
    } catch (const ValidationError& ex) {
      throw ParseError(line_no, ex.what());
    }
  }
  return out;
}

}  // namespace trafficmon
