#include "trafficmon/types.hpp"

#include <cmath>

#include "trafficmon/errors.hpp"

namespace trafficmon {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "pedestrian", "cyclist", "car", "bus", "truck"};

}  // namespace

std::string_view to_string(ClassLabel label) {
  return kClassNames[index_of(label)];
}

ClassLabel parse_class_label(std::string_view text) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == text) return kAllClasses[i];
  }
  throw ValidationError("unknown class label '" + std::string(text) + "'");
}

std::string_view to_string(Direction dir) {
  switch (dir) {
    case Direction::kNorth: return "N";
    case Direction::kSouth: return "S";
    case Direction::kEast: return "E";
    case Direction::kWest: return "W";
  }
  return "?";
}

Direction parse_direction(std::string_view text) {
  if (text == "N") return Direction::kNorth;
  if (text == "S") return Direction::kSouth;
  if (text == "E") return Direction::kEast;
  if (text == "W") return Direction::kWest;
  throw ValidationError("unknown direction '" + std::string(text) + "'");
}

Point unit_vector(Direction dir) {
  switch (dir) {
    case Direction::kNorth: return {0.0, -1.0};
    case Direction::kSouth: return {0.0, 1.0};
    case Direction::kEast: return {1.0, 0.0};
    case Direction::kWest: return {-1.0, 0.0};
  }
  return {};
}

std::string_view to_string(RoadType road) {
  return road == RoadType::kFreeway ? "freeway" : "intersection";
}

RoadType parse_road_type(std::string_view text) {
  if (text == "freeway") return RoadType::kFreeway;
  if (text == "intersection") return RoadType::kIntersection;
  throw ValidationError("unknown road type '" + std::string(text) + "'");
}

std::string_view to_string(SeverityLevel level) {
  switch (level) {
    case SeverityLevel::kLow: return "low";
    case SeverityLevel::kMedium: return "medium";
    case SeverityLevel::kHigh: return "high";
  }
  return "?";
}

char severity_code(SeverityLevel level) {
  switch (level) {
    case SeverityLevel::kLow: return 'L';
    case SeverityLevel::kMedium: return 'M';
    case SeverityLevel::kHigh: return 'H';
  }
  return '?';
}

SeverityLevel parse_severity(std::string_view text) {
  if (text == "low" || text == "L") return SeverityLevel::kLow;
  if (text == "medium" || text == "M") return SeverityLevel::kMedium;
  if (text == "high" || text == "H") return SeverityLevel::kHigh;
  throw ValidationError("unknown severity '" + std::string(text) + "'");
}

std::string_view to_string(WeatherTag tag) {
  switch (tag) {
    case WeatherTag::kClear: return "clear";
    case WeatherTag::kRain: return "rain";
    case WeatherTag::kSnow: return "snow";
  }
  return "?";
}

WeatherTag parse_weather(std::string_view text) {
  if (text == "clear") return WeatherTag::kClear;
  if (text == "rain") return WeatherTag::kRain;
  if (text == "snow") return WeatherTag::kSnow;
  throw ValidationError("unknown weather tag '" + std::string(text) + "'");
}

void validate(const Detection& det) {
  validate(det.box);
  if (!(det.score >= 0.0 && det.score <= 1.0)) {
    throw ValidationError("detection score outside [0, 1]");
  }
  if (det.frame_index < 0) {
    throw ValidationError("negative frame index");
  }
  if (det.embedding) {
    double norm2 = 0.0;
    for (double v : *det.embedding) norm2 += v * v;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
      throw ValidationError("embedding is not unit length");
    }
  }
}

std::string_view to_string(TrackState state) {
  switch (state) {
    case TrackState::kTentative: return "tentative";
    case TrackState::kActive: return "active";
    case TrackState::kFinished: return "finished";
  }
  return "?";
}

double Track::max_score() const {
  double best = 0.0;
  for (const auto& d : detections) best = std::max(best, d.score);
  return best;
}

ClassLabel Track::majority_class() const {
  std::array<std::size_t, kNumClasses> votes{};
  for (const auto& d : detections) ++votes[index_of(d.class_label)];
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumClasses; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  return kAllClasses[best];
}

}  // namespace trafficmon
