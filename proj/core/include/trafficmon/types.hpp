#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/geometry.hpp"

namespace trafficmon {

enum class ClassLabel : std::uint8_t { kPedestrian, kCyclist, kCar, kBus, kTruck };

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::kPedestrian, ClassLabel::kCyclist, ClassLabel::kCar,
    ClassLabel::kBus, ClassLabel::kTruck};

std::string_view to_string(ClassLabel label);
// Throws ValidationError for anything outside the five-class set.
ClassLabel parse_class_label(std::string_view text);
inline std::size_t index_of(ClassLabel label) {
  return static_cast<std::size_t>(label);
}

// Cardinal travel direction under the y-down image convention:
// E = +x, W = -x, N = -y, S = +y.
enum class Direction : std::uint8_t { kNorth, kSouth, kEast, kWest };

inline constexpr std::array<Direction, 4> kAllDirections = {
    Direction::kNorth, Direction::kSouth, Direction::kEast, Direction::kWest};

std::string_view to_string(Direction dir);
Direction parse_direction(std::string_view text);
Point unit_vector(Direction dir);

enum class RoadType : std::uint8_t { kFreeway, kIntersection };

std::string_view to_string(RoadType road);
RoadType parse_road_type(std::string_view text);

enum class SeverityLevel : std::uint8_t { kLow, kMedium, kHigh };

std::string_view to_string(SeverityLevel level);
// Single-letter code used in heatmap grids: L, M, H.
char severity_code(SeverityLevel level);
SeverityLevel parse_severity(std::string_view text);

enum class WeatherTag : std::uint8_t { kClear, kRain, kSnow };

std::string_view to_string(WeatherTag tag);
WeatherTag parse_weather(std::string_view text);

struct RunLength {
  std::int32_t row = 0;
  std::int32_t start = 0;
  std::int32_t length = 0;

  friend bool operator==(const RunLength&, const RunLength&) = default;
};

// Mask payload as it arrives on the wire; decoded into a BitMask by
// ingest::decode_mask once the grid size is known.
struct MaskEncoding {
  enum class Kind : std::uint8_t { kPolygon, kRunLength };
  Kind kind = Kind::kPolygon;
  std::vector<Point> polygon;
  std::vector<RunLength> runs;

  friend bool operator==(const MaskEncoding&, const MaskEncoding&) = default;
};

struct Detection {
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  ClassLabel class_label = ClassLabel::kCar;
  BoundingBox box;
  double score = 1.0;
  std::optional<std::vector<double>> embedding;
  std::optional<MaskEncoding> mask;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Throws ValidationError / InvalidGeometryError when the detection violates
// its invariants (score range, box validity, unit-norm embedding).
void validate(const Detection& det);

enum class TrackState : std::uint8_t { kTentative, kActive, kFinished };

std::string_view to_string(TrackState state);

struct Track {
  std::int64_t track_id = 0;
  std::vector<Detection> detections;
  TrackState state = TrackState::kTentative;

  const Detection& last() const { return detections.back(); }
  std::int64_t first_frame() const { return detections.front().frame_index; }
  std::int64_t last_frame() const { return detections.back().frame_index; }
  double max_score() const;
  // Most frequent class; ties resolve to the lowest class index.
  ClassLabel majority_class() const;
};

}  // namespace trafficmon
