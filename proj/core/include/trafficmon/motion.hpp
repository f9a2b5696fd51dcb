#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trafficmon/types.hpp"

namespace trafficmon {

struct TimedPoint {
  std::int64_t timestamp_ms = 0;
  Point position;
};

struct MotionConfig {
  double min_displacement_px = 10.0;
  // A direction is "detected" once it has max(min_support_floor,
  // ceil(min_support_fraction * total)) tracks.
  std::int64_t min_support_floor = 3;
  double min_support_fraction = 0.05;
};

struct DirectionHistogram {
  std::array<std::int64_t, 4> counts{};

  void add(Direction d) { ++counts[static_cast<std::size_t>(d)]; }
  void remove(Direction d) { --counts[static_cast<std::size_t>(d)]; }
  std::int64_t count(Direction d) const { return counts[static_cast<std::size_t>(d)]; }
  std::int64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

// Mean centroid speed, px/s, over the samples whose timestamp lies within
// window_ms of the newest one: travelled path length divided by elapsed
// time. Throws InsufficientDataError with fewer than two samples (or zero
// elapsed time) inside the window.
double estimate_speed(std::span<const TimedPoint> samples, std::int64_t window_ms);
double estimate_speed(const Track& track, std::int64_t window_ms);

// Net displacement quantized to the dominant axis; |dx| == |dy| resolves to
// the horizontal axis. nullopt when the displacement is shorter than
// min_displacement_px.
std::optional<Direction> dominant_direction(Point from, Point to, double min_displacement_px);
std::optional<Direction> dominant_direction(const Track& track,
                                            double min_displacement_px = 10.0);

DirectionHistogram build_direction_histogram(std::span<const Track> tracks,
                                             double min_displacement_px = 10.0);

std::int64_t min_support(const DirectionHistogram& hist, const MotionConfig& cfg = {});
std::vector<Direction> detected_directions(const DirectionHistogram& hist,
                                           const MotionConfig& cfg = {});

// More than two detected directions is an intersection, otherwise a freeway.
RoadType classify_road_type(const DirectionHistogram& hist, const MotionConfig& cfg = {});

}  // namespace trafficmon
