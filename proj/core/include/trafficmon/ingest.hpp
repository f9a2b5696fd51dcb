#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/geometry.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

// All detections of one camera frame. A frame with no detections is still a
// frame: it carries time and (optionally) the content digest used for
// frozen-video detection.
struct FrameDetections {
  std::string camera_id;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::vector<Detection> detections;
  std::optional<std::uint64_t> frame_digest;

  friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

struct CountingLine {
  std::string label;
  Point p1;
  Point p2;
  Direction positive_dir = Direction::kNorth;

  friend bool operator==(const CountingLine&, const CountingLine&) = default;
};

// Throws ValidationError if p1 == p2 or positive_dir is parallel to the line.
void validate(const CountingLine& line);

struct GeoLocation {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoLocation&, const GeoLocation&) = default;
};

struct CameraRecord {
  std::string camera_id;
  std::string name;
  double frame_rate_fps = 10.0;
  std::optional<RoadType> road_type_override;
  std::vector<CountingLine> counting_lines;
  std::optional<WeatherTag> weather_tag;
  std::optional<GeoLocation> location;

  friend bool operator==(const CameraRecord&, const CameraRecord&) = default;
};

void validate(const CameraRecord& camera);

// Streaming reader for the newline-delimited detection log. Consecutive lines
// sharing (camera, frame) are grouped into one FrameDetections. A line
// without "cls"/"box" marks a frame that has no detections.
class DetectionLogReader {
 public:
  explicit DetectionLogReader(std::istream& in);

  // Next complete frame, or nullopt at end of input. Throws ParseError
  // (malformed JSON, missing fields, ordering violations) or ValidationError
  // (class label outside the five-class set, bad score, bad box).
  std::optional<FrameDetections> next();

  std::size_t line_number() const { return line_no_; }

 private:
  struct PendingLine;
  bool read_line(PendingLine& out);

  std::istream& in_;
  std::size_t line_no_ = 0;
  std::optional<FrameDetections> pending_;
  struct CameraCursor {
    std::string camera_id;
    std::int64_t last_frame = -1;
    std::int64_t last_ts = 0;
  };
  std::vector<CameraCursor> cursors_;
};

std::vector<FrameDetections> parse_detection_log(std::istream& in);
std::vector<FrameDetections> parse_detection_log(std::string_view text);

// Lines for one frame (a single marker line when the frame is empty).
std::string format_frame(const FrameDetections& frame);
void write_detection_log(std::ostream& out, std::span<const FrameDetections> frames);

// Rasterize a polygon (even-odd rule, boundary pixels included; a pixel is the
// integer point at its index) or expand a run-length list into a BitMask.
// Throws DecodeError on fewer than three vertices, zero-area or
// self-intersecting polygons, and runs that leave the grid.
BitMask decode_mask(const MaskEncoding& mask, std::int32_t width, std::int32_t height);

// Registry file: a JSON array of camera objects, or an object with a
// "cameras" array. An empty (or whitespace-only) file is an empty registry.
std::vector<CameraRecord> load_camera_registry(std::istream& in);
std::vector<CameraRecord> load_camera_registry_file(const std::string& path);

CameraRecord parse_camera_record(std::string_view json_text);
std::string camera_record_json(const CameraRecord& camera);

}  // namespace trafficmon
