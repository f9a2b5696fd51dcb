#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "builders.hpp"
#include "oracles.hpp"
#include "scenes.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/ingest.hpp"

namespace tmon = trafficmon;
using tmon::testing::box;

TEST(DetectionLog, EmptyInputGivesNoFrames) {
  EXPECT_TRUE(tmon::parse_detection_log(std::string_view{}).empty());
}

TEST(DetectionLog, SingleCarLine) {
  const auto frames = tmon::parse_detection_log(
      R"({"cam":"c1","frame":0,"ts_ms":5,"cls":"car","box":[1,2,3,4],"score":0.75})");
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].camera_id, "c1");
  EXPECT_EQ(frames[0].timestamp_ms, 5);
  ASSERT_EQ(frames[0].detections.size(), 1u);
  const auto& d = frames[0].detections[0];
  EXPECT_EQ(d.class_label, tmon::ClassLabel::kCar);
  EXPECT_EQ(d.box, box(1, 2, 3, 4));
  EXPECT_DOUBLE_EQ(d.score, 0.75);
  EXPECT_FALSE(frames[0].frame_digest.has_value());
}

TEST(DetectionLog, LinesSharingAFrameAreGrouped) {
  const std::string text =
      R"({"cam":"c","frame":7,"ts_ms":700,"cls":"car","box":[0,0,5,5],"score":0.9}
{"cam":"c","frame":7,"ts_ms":700,"cls":"bus","box":[10,0,5,5],"score":0.8}
{"cam":"c","frame":7,"ts_ms":700,"cls":"truck","box":[20,0,5,5],"score":0.7}
)";
  const auto frames = tmon::parse_detection_log(text);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].frame_index, 7);
  ASSERT_EQ(frames[0].detections.size(), 3u);
  EXPECT_EQ(frames[0].detections[1].class_label, tmon::ClassLabel::kBus);
  for (const auto& d : frames[0].detections) EXPECT_EQ(d.frame_index, 7);
}

TEST(DetectionLog, MarkerLineIsAnEmptyFrame) {
  const auto frames = tmon::parse_detection_log(
      "{\"cam\":\"c\",\"frame\":0,\"ts_ms\":0,\"digest\":42}\n"
      "{\"cam\":\"c\",\"frame\":1,\"ts_ms\":100,\"cls\":\"car\",\"box\":[0,0,5,5],\"score\":1}\n");
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_TRUE(frames[0].detections.empty());
  EXPECT_EQ(frames[0].frame_digest, 42u);
}

TEST(DetectionLog, MalformedLineReportsLineNumber) {
  const std::string text =
      "{\"cam\":\"c\",\"frame\":0,\"ts_ms\":0}\n"
      "{\"cam\":\"c\",\"frame\":1,\"ts_ms\"\n";
  try {
    tmon::parse_detection_log(text);
    FAIL() << "expected ParseError";
  } catch (const tmon::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(DetectionLog, UnknownClassIsValidationError) {
  EXPECT_THROW(
      tmon::parse_detection_log(
          R"({"cam":"c","frame":0,"ts_ms":0,"cls":"tram","box":[0,0,5,5],"score":1})"),
      tmon::ValidationError);
}

TEST(DetectionLog, InvalidFieldsAreRejected) {
  EXPECT_THROW(
      tmon::parse_detection_log(
          R"({"cam":"c","frame":0,"ts_ms":0,"cls":"car","box":[0,0,0,5],"score":1})"),
      tmon::ValidationError);
  EXPECT_THROW(
      tmon::parse_detection_log(
          R"({"cam":"c","frame":0,"ts_ms":0,"cls":"car","box":[0,0,5,5],"score":1.2})"),
      tmon::ValidationError);
  EXPECT_THROW(tmon::parse_detection_log(R"({"cam":"c","frame":0,"ts_ms":0,"cls":"car"})"),
               tmon::ValidationError);
}

TEST(DetectionLog, OutOfOrderFramesAreParseErrors) {
  const std::string text =
      "{\"cam\":\"c\",\"frame\":3,\"ts_ms\":300}\n"
      "{\"cam\":\"c\",\"frame\":2,\"ts_ms\":400}\n";
  EXPECT_THROW(tmon::parse_detection_log(text), tmon::ParseError);
  const std::string ts_back =
      "{\"cam\":\"c\",\"frame\":3,\"ts_ms\":300}\n"
      "{\"cam\":\"c\",\"frame\":4,\"ts_ms\":200}\n";
  EXPECT_THROW(tmon::parse_detection_log(ts_back), tmon::ParseError);
}

TEST(DetectionLog, StreamingReaderYieldsFramesInOrder) {
  std::istringstream in(
      "{\"cam\":\"a\",\"frame\":0,\"ts_ms\":0}\n"
      "{\"cam\":\"b\",\"frame\":0,\"ts_ms\":0}\n"
      "{\"cam\":\"a\",\"frame\":1,\"ts_ms\":100}\n");
  tmon::DetectionLogReader reader(in);
  std::vector<std::string> seen;
  while (auto f = reader.next()) seen.push_back(f->camera_id + std::to_string(f->frame_index));
  EXPECT_EQ(seen, (std::vector<std::string>{"a0", "b0", "a1"}));
}

TEST(DetectionLogProperty, FormatThenParseIsIdentity) {
  tmon::testing::TestRng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<tmon::FrameDetections> frames;
    std::int64_t ts = rng.integer(0, 100000);
    std::int64_t index = rng.integer(0, 50);
    const int n = rng.integer(1, 6);
    for (int f = 0; f < n; ++f) {
      tmon::FrameDetections fr;
      fr.camera_id = "cam" + std::to_string(trial % 3);
      fr.frame_index = index += rng.integer(1, 3);
      fr.timestamp_ms = ts += rng.integer(0, 200);
      if (rng.chance(0.5)) fr.frame_digest = (static_cast<std::uint64_t>(rng.integer(0, 1 << 30)) << 33) | 7u;
      const int dets = rng.integer(0, 4);
      for (int k = 0; k < dets; ++k) {
        tmon::Detection d;
        d.frame_index = fr.frame_index;
        d.timestamp_ms = fr.timestamp_ms;
        d.class_label = tmon::kAllClasses[static_cast<std::size_t>(rng.integer(0, 4))];
        d.box = box(rng.uniform(-10, 1000), rng.uniform(-10, 700), rng.uniform(0.5, 200),
                    rng.uniform(0.5, 200));
        d.score = rng.uniform();
        if (rng.chance(0.3)) {
          std::vector<double> e(4);
          double norm = 0;
          for (auto& c : e) norm += (c = rng.uniform(0.1, 1)) * c;
          for (auto& c : e) c /= std::sqrt(norm);
          d.embedding = e;
        }
        if (rng.chance(0.2)) {
          tmon::MaskEncoding m;
          m.kind = tmon::MaskEncoding::Kind::kRunLength;
          m.runs = {{1, 2, 3}, {2, 0, 4}};
          d.mask = m;
        }
        fr.detections.push_back(d);
      }
      frames.push_back(fr);
    }
    std::ostringstream out;
    tmon::write_detection_log(out, frames);
    EXPECT_EQ(tmon::parse_detection_log(out.str()), frames) << out.str();
  }
}

TEST(DecodeMask, RectanglePolygonHasFortyPixels) {
  tmon::MaskEncoding m;
  m.polygon = {{0, 0}, {9, 0}, {9, 3}, {0, 3}};
  const auto mask = tmon::decode_mask(m, 20, 20);
  EXPECT_EQ(mask.count(), 40u);
  EXPECT_TRUE(mask.test(9, 3));
  EXPECT_FALSE(mask.test(10, 3));
}

TEST(DecodeMask, RunLengthExamples) {
  tmon::MaskEncoding m;
  m.kind = tmon::MaskEncoding::Kind::kRunLength;
  m.runs = {{0, 0, 5}};
  EXPECT_EQ(tmon::decode_mask(m, 10, 10).count(), 5u);
  m.runs.clear();
  EXPECT_EQ(tmon::decode_mask(m, 10, 10).count(), 0u);
  m.runs = {{0, 8, 5}};
  EXPECT_THROW(tmon::decode_mask(m, 10, 10), tmon::DecodeError);
  m.runs = {{10, 0, 1}};
  EXPECT_THROW(tmon::decode_mask(m, 10, 10), tmon::DecodeError);
}

TEST(DecodeMask, BadPolygonsThrow) {
  tmon::MaskEncoding m;
  m.polygon = {{0, 0}, {5, 5}};
  EXPECT_THROW(tmon::decode_mask(m, 10, 10), tmon::DecodeError);
  m.polygon = {{0, 0}, {5, 5}, {9, 9}};
  EXPECT_THROW(tmon::decode_mask(m, 10, 10), tmon::DecodeError);
  m.polygon = {{0, 0}, {8, 8}, {8, 0}, {0, 8}};  // bow tie
  EXPECT_THROW(tmon::decode_mask(m, 10, 10), tmon::DecodeError);
}

TEST(DecodeMaskProperty, AgreesWithPointInPolygonOracle) {
  tmon::testing::TestRng rng(22);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int w = rng.integer(4, 64), h = rng.integer(4, 64);
    std::vector<tmon::Point> pts;
    const int n = rng.integer(3, 12);
    for (int i = 0; i < n; ++i) pts.push_back({double(rng.integer(0, w - 1)), double(rng.integer(0, h - 1))});
    const auto hull = tmon::testing::gift_wrap(pts);
    if (hull.size() < 3) continue;
    tmon::MaskEncoding m;
    m.polygon = hull;
    const auto mask = tmon::decode_mask(m, w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        ASSERT_EQ(mask.test(x, y), tmon::testing::point_in_polygon(hull, x, y))
            << "trial " << trial << " pixel " << x << "," << y;
      }
    }
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

TEST(DecodeMaskProperty, ConcaveAndFractionalPolygons) {
  tmon::MaskEncoding m;
  m.polygon = {{1.5, 1.5}, {30.2, 2.1}, {30.7, 20.4}, {15.1, 8.9}, {2.2, 25.3}};
  const auto mask = tmon::decode_mask(m, 40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      ASSERT_EQ(mask.test(x, y), tmon::testing::point_in_polygon(m.polygon, x, y)) << x << "," << y;
}

TEST(Registry, EmptyFileIsEmptyRegistry) {
  std::istringstream in("  \n");
  EXPECT_TRUE(tmon::load_camera_registry(in).empty());
}

TEST(Registry, TwoCameras) {
  std::istringstream in(R"([
    {"camera_id":"a","name":"A","frame_rate_fps":10,"weather_tag":"rain",
     "counting_lines":[{"label":"L1","p1":[0,100],"p2":[200,100],"positive_dir":"N"}]},
    {"camera_id":"b","name":"B","frame_rate_fps":15,"road_type_override":"intersection",
     "location":[41.6,-93.6]}])");
  const auto cams = tmon::load_camera_registry(in);
  ASSERT_EQ(cams.size(), 2u);
  EXPECT_EQ(cams[0].weather_tag, tmon::WeatherTag::kRain);
  ASSERT_EQ(cams[0].counting_lines.size(), 1u);
  EXPECT_EQ(cams[0].counting_lines[0].positive_dir, tmon::Direction::kNorth);
  EXPECT_EQ(cams[1].road_type_override, tmon::RoadType::kIntersection);
  ASSERT_TRUE(cams[1].location);
  EXPECT_DOUBLE_EQ(cams[1].location->lon, -93.6);
  for (const auto& c : cams) EXPECT_EQ(tmon::parse_camera_record(tmon::camera_record_json(c)), c);
}

TEST(Registry, ObjectFormWithCamerasArray) {
  std::istringstream in(R"({"cameras":[{"camera_id":"a","frame_rate_fps":10}]})");
  EXPECT_EQ(tmon::load_camera_registry(in).size(), 1u);
}

TEST(Registry, DuplicateIdsAreRejected) {
  std::istringstream in(
      R"([{"camera_id":"a","frame_rate_fps":10},{"camera_id":"a","frame_rate_fps":10}])");
  EXPECT_THROW(tmon::load_camera_registry(in), tmon::DuplicateIdError);
}

TEST(Registry, NonPositiveFrameRateIsRejected) {
  std::istringstream in(R"([{"camera_id":"a","frame_rate_fps":0}])");
  EXPECT_THROW(tmon::load_camera_registry(in), tmon::ValidationError);
}

TEST(CountingLineValidation, DegenerateOrParallelLinesAreRejected) {
  tmon::CountingLine l{"x", {0, 0}, {0, 0}, tmon::Direction::kNorth};
  EXPECT_THROW(tmon::validate(l), tmon::ValidationError);
  l.p2 = {100, 0};
  l.positive_dir = tmon::Direction::kEast;
  EXPECT_THROW(tmon::validate(l), tmon::ValidationError);  // parallel to the line
  l.positive_dir = tmon::Direction::kSouth;
  EXPECT_NO_THROW(tmon::validate(l));
}
