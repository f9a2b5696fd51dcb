#include "trafficmon/motion.hpp"

#include <algorithm>
#include <cmath>

#include "trafficmon/errors.hpp"

namespace trafficmon {

double estimate_speed(std::span<const TimedPoint> samples, std::int64_t window_ms) {
  if (samples.size() < 2) throw InsufficientDataError("speed needs at least two samples");
  const std::int64_t newest = samples.back().timestamp_ms;
  std::size_t first = samples.size() - 1;
  while (first > 0 && newest - samples[first - 1].timestamp_ms <= window_ms) --first;
  if (samples.size() - first < 2) {
    throw InsufficientDataError("speed needs at least two samples inside the window");
  }
  const std::int64_t elapsed_ms = newest - samples[first].timestamp_ms;
  if (elapsed_ms <= 0) throw InsufficientDataError("speed window spans zero time");
  double path = 0.0;
  for (std::size_t i = first + 1; i < samples.size(); ++i) {
    path += std::hypot(samples[i].position.x - samples[i - 1].position.x,
                       samples[i].position.y - samples[i - 1].position.y);
  }
  return path * 1000.0 / static_cast<double>(elapsed_ms);
}

double estimate_speed(const Track& track, std::int64_t window_ms) {
  std::vector<TimedPoint> pts;
  pts.reserve(track.detections.size());
  for (const auto& d : track.detections) pts.push_back({d.timestamp_ms, d.box.center()});
  return estimate_speed(pts, window_ms);
}

std::optional<Direction> dominant_direction(Point from, Point to, double min_displacement_px) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (std::hypot(dx, dy) < min_displacement_px) return std::nullopt;
  if (std::abs(dx) >= std::abs(dy)) return dx >= 0 ? Direction::kEast : Direction::kWest;
  return dy > 0 ? Direction::kSouth : Direction::kNorth;
}

std::optional<Direction> dominant_direction(const Track& track, double min_displacement_px) {
  if (track.detections.empty()) return std::nullopt;
  return dominant_direction(track.detections.front().box.center(),
                            track.detections.back().box.center(), min_displacement_px);
}

DirectionHistogram build_direction_histogram(std::span<const Track> tracks,
                                             double min_displacement_px) {
  DirectionHistogram hist;
  for (const auto& t : tracks) {
    if (auto d = dominant_direction(t, min_displacement_px)) hist.add(*d);
  }
  return hist;
}

std::int64_t min_support(const DirectionHistogram& hist, const MotionConfig& cfg) {
  const auto frac = static_cast<std::int64_t>(
      std::ceil(cfg.min_support_fraction * static_cast<double>(hist.total())));
  return std::max(cfg.min_support_floor, frac);
}

std::vector<Direction> detected_directions(const DirectionHistogram& hist,
                                           const MotionConfig& cfg) {
  const auto support = min_support(hist, cfg);
  std::vector<Direction> out;
  for (Direction d : kAllDirections) {
    if (hist.count(d) >= support) out.push_back(d);
  }
  return out;
}

RoadType classify_road_type(const DirectionHistogram& hist, const MotionConfig& cfg) {
  return detected_directions(hist, cfg).size() > 2 ? RoadType::kIntersection
                                                   : RoadType::kFreeway;
}

}  // namespace trafficmon
