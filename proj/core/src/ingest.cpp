#include "trafficmon/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

namespace codec {

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

json to_json(const BoundingBox& box) { return json::array({box.x, box.y, box.w, box.h}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw ValidationError("box must be [x, y, w, h]");
  }
  BoundingBox box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                  j[3].get<double>()};
  validate(box);
  return box;
}

namespace {

Point point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

json to_json(const MaskEncoding& mask) {
  if (mask.kind == MaskEncoding::Kind::kPolygon) {
    json poly = json::array();
    for (const auto& p : mask.polygon) poly.push_back(json::array({p.x, p.y}));
    return json{{"poly", std::move(poly)}};
  }
  json rle = json::array();
  for (const auto& r : mask.runs) rle.push_back(json::array({r.row, r.start, r.length}));
  return json{{"rle", std::move(rle)}};
}

MaskEncoding mask_from_json(const json& j) {
  MaskEncoding mask;
  if (auto it = j.find("poly"); it != j.end()) {
    mask.kind = MaskEncoding::Kind::kPolygon;
    for (const auto& p : *it) mask.polygon.push_back(point_from_json(p));
  } else if (auto rit = j.find("rle"); rit != j.end()) {
    mask.kind = MaskEncoding::Kind::kRunLength;
    for (const auto& r : *rit) {
      if (!r.is_array() || r.size() != 3) throw ValidationError("rle run must be [row, start, len]");
      mask.runs.push_back({r[0].get<std::int32_t>(), r[1].get<std::int32_t>(),
                           r[2].get<std::int32_t>()});
    }
  } else {
    throw ValidationError("mask needs 'poly' or 'rle'");
  }
  return mask;
}

json to_json(const CountingLine& line) {
  return json{{"label", line.label},
              {"p1", json::array({line.p1.x, line.p1.y})},
              {"p2", json::array({line.p2.x, line.p2.y})},
              {"positive_dir", std::string(to_string(line.positive_dir))}};
}

CountingLine counting_line_from_json(const json& j) {
  CountingLine line;
  line.label = require(j, "label").get<std::string>();
  line.p1 = point_from_json(require(j, "p1"));
  line.p2 = point_from_json(require(j, "p2"));
  line.positive_dir = parse_direction(require(j, "positive_dir").get<std::string>());
  validate(line);
  return line;
}

json to_json(const CameraRecord& camera) {
  json j{{"camera_id", camera.camera_id},
         {"name", camera.name},
         {"frame_rate_fps", camera.frame_rate_fps}};
  if (camera.road_type_override) {
    j["road_type_override"] = std::string(to_string(*camera.road_type_override));
  }
  json lines = json::array();
  for (const auto& l : camera.counting_lines) lines.push_back(to_json(l));
  j["counting_lines"] = std::move(lines);
  if (camera.weather_tag) j["weather_tag"] = std::string(to_string(*camera.weather_tag));
  if (camera.location) j["location"] = json::array({camera.location->lat, camera.location->lon});
  return j;
}

CameraRecord camera_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("camera entry must be an object");
  CameraRecord c;
  c.camera_id = require(j, "camera_id").get<std::string>();
  c.name = j.value("name", c.camera_id);
  c.frame_rate_fps = require(j, "frame_rate_fps").get<double>();
  if (auto it = j.find("road_type_override"); it != j.end() && !it->is_null()) {
    c.road_type_override = parse_road_type(it->get<std::string>());
  }
  if (auto it = j.find("counting_lines"); it != j.end()) {
    for (const auto& l : *it) c.counting_lines.push_back(counting_line_from_json(l));
  }
  if (auto it = j.find("weather_tag"); it != j.end() && !it->is_null()) {
    c.weather_tag = parse_weather(it->get<std::string>());
  }
  if (auto it = j.find("location"); it != j.end() && !it->is_null()) {
    const Point p = point_from_json(*it);
    c.location = GeoLocation{p.x, p.y};
  }
  validate(c);
  return c;
}

}  // namespace codec

void validate(const CountingLine& line) {
  const double dx = line.p2.x - line.p1.x;
  const double dy = line.p2.y - line.p1.y;
  if (dx == 0.0 && dy == 0.0) {
    throw ValidationError("counting line '" + line.label + "' has p1 == p2");
  }
  const Point d = unit_vector(line.positive_dir);
  if (dx * d.y - dy * d.x == 0.0) {
    throw ValidationError("counting line '" + line.label +
                          "': positive_dir is parallel to the line");
  }
}

void validate(const CameraRecord& camera) {
  if (camera.camera_id.empty()) throw ValidationError("empty camera_id");
  if (!(camera.frame_rate_fps > 0.0) || !std::isfinite(camera.frame_rate_fps)) {
    throw ValidationError("camera '" + camera.camera_id + "': frame_rate_fps must be > 0");
  }
  for (const auto& l : camera.counting_lines) validate(l);
}

// ---------------------------------------------------------------------------
// Detection log

struct DetectionLogReader::PendingLine {
  std::string camera_id;
  std::int64_t frame_index = 0;
  std::int64_t timestamp_ms = 0;
  std::optional<Detection> detection;
  std::optional<std::uint64_t> digest;
};

DetectionLogReader::DetectionLogReader(std::istream& in) : in_(in) {}

bool DetectionLogReader::read_line(PendingLine& out) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_no_;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      const auto j = codec::json::parse(text);
      if (!j.is_object()) throw ValidationError("record must be a JSON object");
      out.camera_id = codec::require(j, "cam").get<std::string>();
      out.frame_index = codec::require(j, "frame").get<std::int64_t>();
      out.timestamp_ms = codec::require(j, "ts_ms").get<std::int64_t>();
      if (out.frame_index < 0) throw ValidationError("negative frame index");
      out.digest.reset();
      if (auto it = j.find("digest"); it != j.end() && !it->is_null()) {
        out.digest = it->get<std::uint64_t>();
      }
      out.detection.reset();
      const bool has_cls = j.contains("cls");
      const bool has_box = j.contains("box");
      if (has_cls != has_box) throw ValidationError("'cls' and 'box' must appear together");
      if (has_cls) {
        Detection d;
        d.frame_index = out.frame_index;
        d.timestamp_ms = out.timestamp_ms;
        d.class_label = parse_class_label(j["cls"].get<std::string>());
        d.box = codec::box_from_json(j["box"]);
        d.score = codec::require(j, "score").get<double>();
        if (auto it = j.find("emb"); it != j.end() && !it->is_null()) {
          d.embedding = it->get<std::vector<double>>();
        }
        if (auto it = j.find("mask"); it != j.end() && !it->is_null()) {
          d.mask = codec::mask_from_json(*it);
        }
        validate(d);
        out.detection = std::move(d);
      }
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no_) + ": " + e.what());
    } catch (const InvalidGeometryError& e) {
      throw ValidationError("line " + std::to_string(line_no_) + ": " + e.what());
    } catch (const codec::json::exception& e) {
      throw ParseError(line_no_, e.what());
    }
    return true;
  }
  return false;
}

std::optional<FrameDetections> DetectionLogReader::next() {
  PendingLine line;
  while (read_line(line)) {
    if (pending_ && pending_->camera_id == line.camera_id &&
        pending_->frame_index == line.frame_index) {
      if (line.timestamp_ms != pending_->timestamp_ms) {
        throw ParseError(line_no_, "timestamp differs within frame " +
                                       std::to_string(line.frame_index));
      }
      if (line.digest && pending_->frame_digest && *line.digest != *pending_->frame_digest) {
        throw ParseError(line_no_, "digest differs within frame " +
                                       std::to_string(line.frame_index));
      }
      if (line.digest) pending_->frame_digest = line.digest;
      if (line.detection) pending_->detections.push_back(std::move(*line.detection));
      continue;
    }

    auto cursor = std::find_if(cursors_.begin(), cursors_.end(), [&](const CameraCursor& c) {
      return c.camera_id == line.camera_id;
    });
    if (cursor == cursors_.end()) {
      cursors_.push_back({line.camera_id, -1, line.timestamp_ms});
      cursor = std::prev(cursors_.end());
    }
    if (line.frame_index <= cursor->last_frame) {
      throw ParseError(line_no_, "frame " + std::to_string(line.frame_index) + " of camera '" +
                                     line.camera_id + "' is out of order");
    }
    if (line.timestamp_ms < cursor->last_ts) {
      throw ParseError(line_no_, "timestamp decreases for camera '" + line.camera_id + "'");
    }
    cursor->last_frame = line.frame_index;
    cursor->last_ts = line.timestamp_ms;

    FrameDetections fresh;
    fresh.camera_id = std::move(line.camera_id);
    fresh.frame_index = line.frame_index;
    fresh.timestamp_ms = line.timestamp_ms;
    fresh.frame_digest = line.digest;
    if (line.detection) fresh.detections.push_back(std::move(*line.detection));

    std::optional<FrameDetections> done = std::move(pending_);
    pending_ = std::move(fresh);
    if (done) return done;
  }
  std::optional<FrameDetections> done = std::move(pending_);
  pending_.reset();
  return done;
}

std::vector<FrameDetections> parse_detection_log(std::istream& in) {
  DetectionLogReader reader(in);
  std::vector<FrameDetections> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::vector<FrameDetections> parse_detection_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_detection_log(in);
}

std::string format_frame(const FrameDetections& frame) {
  std::string out;
  auto header = [&]() {
    codec::json j;
    j["cam"] = frame.camera_id;
    j["frame"] = frame.frame_index;
    j["ts_ms"] = frame.timestamp_ms;
    return j;
  };
  if (frame.detections.empty()) {
    auto j = header();
    if (frame.frame_digest) j["digest"] = *frame.frame_digest;
    out += j.dump();
    out += '\n';
    return out;
  }
  for (const auto& d : frame.detections) {
    auto j = header();
    j["cls"] = std::string(to_string(d.class_label));
    j["box"] = codec::to_json(d.box);
    j["score"] = d.score;
    if (d.embedding) j["emb"] = *d.embedding;
    if (d.mask) j["mask"] = codec::to_json(*d.mask);
    if (frame.frame_digest) j["digest"] = *frame.frame_digest;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_detection_log(std::ostream& out, std::span<const FrameDetections> frames) {
  for (const auto& f : frames) out << format_frame(f);
}

// ---------------------------------------------------------------------------
// Masks

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point a, Point b, Point c, Point d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return (d1 == 0 && on_segment(c, d, a)) || (d2 == 0 && on_segment(c, d, b)) ||
         (d3 == 0 && on_segment(a, b, c)) || (d4 == 0 && on_segment(a, b, d));
}

void check_polygon(const std::vector<Point>& poly) {
  if (poly.size() < 3) throw DecodeError("polygon needs at least 3 vertices");
  for (const auto& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DecodeError("non-finite vertex");
  }
  double twice_area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    twice_area += a.x * b.y - b.x * a.y;
  }
  if (twice_area == 0.0) throw DecodeError("degenerate polygon (zero area)");
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      // Adjacent edges share a vertex by construction.
      if (k == i + 1 || (i == 0 && k == n - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[k], poly[(k + 1) % n])) {
        throw DecodeError("self-intersecting polygon");
      }
    }
  }
}

constexpr double kSnap = 1e-9;

void rasterize_polygon(const std::vector<Point>& poly, BitMask& mask) {
  check_polygon(poly);
  const std::size_t n = poly.size();
  double ymin = poly[0].y, ymax = poly[0].y;
  for (const auto& p : poly) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const auto row_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(ymin - kSnap)));
  const auto row_hi = std::min<std::int64_t>(mask.height() - 1,
                                             static_cast<std::int64_t>(std::floor(ymax + kSnap)));
  auto fill_span = [&](std::int64_t row, double xa, double xb) {
    auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(xa - kSnap)));
    auto hi = std::min<std::int64_t>(mask.width() - 1, static_cast<std::int64_t>(std::floor(xb + kSnap)));
    for (auto x = lo; x <= hi; ++x) {
      mask.set(static_cast<std::int32_t>(x), static_cast<std::int32_t>(row));
    }
  };

  std::vector<double> xs;
  for (auto row = row_lo; row <= row_hi; ++row) {
    const double y = static_cast<double>(row);
    // Interior: even-odd over half-open edges [ymin, ymax).
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      if ((a.y <= y) != (b.y <= y)) {
        xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) fill_span(row, xs[i], xs[i + 1]);

    // Boundary: integer points lying on an edge.
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      if (y < std::min(a.y, b.y) - kSnap || y > std::max(a.y, b.y) + kSnap) continue;
      if (a.y == b.y) {
        fill_span(row, std::min(a.x, b.x), std::max(a.x, b.x));
        continue;
      }
      const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      const double rx = std::round(x);
      if (std::abs(x - rx) <= kSnap) fill_span(row, rx, rx);
    }
  }
}

}  // namespace

BitMask decode_mask(const MaskEncoding& encoding, std::int32_t width, std::int32_t height) {
  if (width < 0 || height < 0) throw DecodeError("negative mask dimensions");
  BitMask mask(width, height);
  if (encoding.kind == MaskEncoding::Kind::kPolygon) {
    rasterize_polygon(encoding.polygon, mask);
    return mask;
  }
  for (const auto& run : encoding.runs) {
    if (run.row < 0 || run.row >= height || run.start < 0 || run.length < 0 ||
        static_cast<std::int64_t>(run.start) + run.length > width) {
      throw DecodeError("run (" + std::to_string(run.row) + ", " + std::to_string(run.start) +
                        ", " + std::to_string(run.length) + ") leaves the grid");
    }
    for (std::int32_t x = run.start; x < run.start + run.length; ++x) mask.set(x, run.row);
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Camera registry

std::vector<CameraRecord> load_camera_registry(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<CameraRecord> out;
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
    return out;
  }
  codec::json doc;
  try {
    doc = codec::json::parse(text);
  } catch (const codec::json::exception& e) {
    throw ParseError(0, std::string("camera registry: ") + e.what());
  }
  const codec::json* entries = &doc;
  if (doc.is_object()) entries = &codec::require(doc, "cameras");
  if (!entries->is_array()) throw ValidationError("camera registry must be a list of cameras");
  for (const auto& e : *entries) {
    CameraRecord c = codec::camera_from_json(e);
    for (const auto& existing : out) {
      if (existing.camera_id == c.camera_id) {
        throw DuplicateIdError("duplicate camera_id '" + c.camera_id + "'");
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CameraRecord> load_camera_registry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open camera registry '" + path + "'");
  return load_camera_registry(in);
}

CameraRecord parse_camera_record(std::string_view json_text) {
  try {
    return codec::camera_from_json(codec::json::parse(json_text));
  } catch (const codec::json::exception& e) {
    throw ParseError(0, e.what());
  }
}

std::string camera_record_json(const CameraRecord& camera) {
  return codec::to_json(camera).dump();
}

}  // namespace trafficmon
