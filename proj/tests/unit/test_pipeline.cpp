#include <gtest/gtest.h>

#include <algorithm>

#include "builders.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/pipeline.hpp"
#include "trafficmon/simulator.hpp"

namespace tmon = trafficmon;
using tmon::SeverityLevel;

namespace {

tmon::CameraRecord camera(const std::string& id) {
  tmon::CameraRecord c;
  c.camera_id = id;
  c.name = id;
  return c;
}

// Eight days; the AM peak is on days 0-3 and again on day 7, so day 7 is
// judged against thresholds learned from days 0-6.
tmon::QueueProfile am_profile() {
  tmon::QueueProfile p;
  p.days = 8;
  p.first_day = 20454;
  p.base_pixel_length = 20.0;
  p.noise_sigma = 2.0;
  p.peaks = {{420, 540, 200.0, {0, 1, 2, 3, 7}}};
  return p;
}

}  // namespace

TEST(Pipeline, EmptyStreamHasUnknownStatusAndNoAggregates) {
  tmon::CameraPipeline p(camera("e"), {});
  const auto out = p.finish();
  EXPECT_TRUE(out.closed.empty());
  EXPECT_TRUE(out.alerts.empty());
  EXPECT_FALSE(p.status().queue_severity.has_value());
  EXPECT_FALSE(p.status().last_update_ts.has_value());
  EXPECT_EQ(tmon::camera_status_json(p.status()).find("\"queue_severity\":\"unknown\"") != std::string::npos,
            true);
}

TEST(Pipeline, AmQueueStatusTransitionsAtPeakBoundaries) {
  const auto profile = am_profile();
  const auto samples = tmon::generate_queue_samples(profile, "q", 4);
  tmon::CameraPipeline p(camera("q"), {});
  const std::int64_t last_day = profile.first_day + 7;
  std::vector<std::pair<std::int64_t, SeverityLevel>> transitions;  // (closed minute, new level)
  std::optional<SeverityLevel> prev;
  auto track = [&](const tmon::PipelineOutput& out) {
    for (const auto& agg : out.closed) {
      if (tmon::day_index(agg.minute_start_ts) != last_day) continue;
      ASSERT_TRUE(agg.severity.has_value());
      EXPECT_EQ(p.status().queue_severity, agg.severity);
      if (prev && *prev != *agg.severity) {
        transitions.emplace_back(tmon::time_of_day_bin(agg.minute_start_ts, 1), *agg.severity);
      }
      prev = agg.severity;
    }
  };
  for (const auto& s : samples) track(p.process_queue_sample(s));
  track(p.finish());
  ASSERT_TRUE(p.thresholds().has_value());
  ASSERT_EQ(prev, SeverityLevel::kLow);
  const std::vector<std::pair<std::int64_t, SeverityLevel>> want{{420, SeverityLevel::kHigh},
                                                                  {540, SeverityLevel::kLow}};
  EXPECT_EQ(transitions, want);
}

TEST(Pipeline, NoSeverityBeforeAWeekOfHistory) {
  auto profile = am_profile();
  profile.days = 3;
  tmon::CameraPipeline p(camera("q"), {});
  for (const auto& s : tmon::generate_queue_samples(profile, "q", 1)) {
    for (const auto& agg : p.process_queue_sample(s).closed) {
      EXPECT_TRUE(agg.mean_pl.has_value());
      EXPECT_FALSE(agg.severity.has_value());
    }
  }
  EXPECT_FALSE(p.status().queue_severity.has_value());
}

TEST(Pipeline, StallAlertIsPublishedWithinOneInterval) {
  const auto cfg = tmon::scenario_preset("stall", 3);
  const auto sc = tmon::generate_scenario(cfg);
  auto cam = camera(cfg.camera_id);
  cam.counting_lines = cfg.counting_lines;
  tmon::CameraPipeline p(cam, {});
  std::vector<std::pair<std::int64_t, tmon::AnomalyEvent>> alerts;
  std::vector<tmon::MinuteAggregate> closed;
  for (const auto& f : sc.frames) {
    auto out = p.process_frame(f);
    for (auto& a : out.alerts) alerts.emplace_back(f.timestamp_ms, a);
    closed.insert(closed.end(), out.closed.begin(), out.closed.end());
    if (!out.alerts.empty()) EXPECT_EQ(p.status().active_anomalies, 1u);
  }
  auto tail = p.finish();
  closed.insert(closed.end(), tail.closed.begin(), tail.closed.end());
  ASSERT_EQ(alerts.size(), 1u);
  const auto& [published_at, alert] = alerts[0];
  ASSERT_TRUE(alert.confirmed_ts_ms);
  EXPECT_LE(published_at - *alert.confirmed_ts_ms, tmon::kMsPerMinute);
  EXPECT_GE(published_at, *alert.confirmed_ts_ms);
  EXPECT_LE(std::abs(alert.start_ts_ms - sc.truth.anomalies[0].start_ts_ms), 10'000);
  // The aggregate for the publishing minute references the alert.
  const auto minute = published_at / tmon::kMsPerMinute * tmon::kMsPerMinute;
  const auto it = std::find_if(closed.begin(), closed.end(),
                               [&](const auto& a) { return a.minute_start_ts == minute; });
  ASSERT_NE(it, closed.end());
  ASSERT_EQ(it->anomalies.size(), 1u);
  EXPECT_EQ(it->anomalies[0].track_id, alert.track_id);
  // One aggregate per minute; counts add up to the line total.
  EXPECT_EQ(closed.size(), 3u);
  std::int64_t counted = 0;
  for (const auto& a : closed)
    for (const auto& [k, n] : a.counts) counted += n;
  EXPECT_EQ(counted, sc.truth.line_total("mid"));
}

TEST(Pipeline, OutOfOrderInputIsRejected) {
  tmon::CameraPipeline p(camera("o"), {});
  p.process_frame(tmon::testing::frame(1, {}, "o", 5000));
  EXPECT_THROW(p.process_frame(tmon::testing::frame(2, {}, "o", 4000)), tmon::SequencingError);
  EXPECT_THROW(p.process_queue_sample({"o", 100, 5.0, std::nullopt}), tmon::SequencingError);
  EXPECT_THROW(p.process_queue_sample({"o", 6000, -1.0, std::nullopt}), tmon::ValidationError);
  p.finish();
  EXPECT_THROW(p.process_frame(tmon::testing::frame(3, {}, "o", 9000)), tmon::SequencingError);
}

TEST(Pipeline, ReplayIsDeterministic) {
  const auto cfg = tmon::scenario_preset("stall", 5);
  const auto sc = tmon::generate_scenario(cfg);
  auto run = [&] {
    auto cam = camera(cfg.camera_id);
    cam.counting_lines = cfg.counting_lines;
    tmon::CameraPipeline p(cam, {});
    std::vector<std::string> lines;
    for (const auto& f : sc.frames)
      for (const auto& a : p.process_frame(f).closed) lines.push_back(tmon::minute_aggregate_json(a));
    for (const auto& a : p.finish().closed) lines.push_back(tmon::minute_aggregate_json(a));
    return lines;
  };
  EXPECT_EQ(run(), run());
}

TEST(FoldAggregates, HourFoldMeansPlAndSumsCounts) {
  std::vector<tmon::MinuteAggregate> minutes;
  const tmon::CountKey key{"mid", tmon::ClassLabel::kCar, tmon::CrossingSign::kPositive};
  for (int m = 0; m < 120; ++m) {
    tmon::MinuteAggregate a;
    a.camera_id = "c";
    a.minute_start_ts = m * tmon::kMsPerMinute;
    a.mean_pl = m;
    a.severity = m == 30 ? SeverityLevel::kHigh : SeverityLevel::kLow;
    a.counts[key] = 2;
    a.frames = 600;
    minutes.push_back(a);
  }
  const auto hours = tmon::fold_aggregates(minutes, 60 * tmon::kMsPerMinute);
  ASSERT_EQ(hours.size(), 2u);
  EXPECT_DOUBLE_EQ(*hours[0].mean_pl, 29.5);
  EXPECT_DOUBLE_EQ(*hours[1].mean_pl, 89.5);
  EXPECT_EQ(hours[0].counts.at(key), 120);
  EXPECT_EQ(hours[0].frames, 36000);
  EXPECT_EQ(hours[0].severity, SeverityLevel::kHigh);
  EXPECT_EQ(hours[1].severity, SeverityLevel::kLow);
  EXPECT_EQ(hours[1].minute_start_ts, 60 * tmon::kMsPerMinute);
}

TEST(FoldAggregates, JsonRoundTrip) {
  tmon::MinuteAggregate a;
  a.camera_id = "c";
  a.minute_start_ts = 120000;
  a.mean_pl = 12.25;
  a.severity = SeverityLevel::kMedium;
  a.counts[{"l", tmon::ClassLabel::kBus, tmon::CrossingSign::kNegative}] = 3;
  a.anomalies = {{7, 99000}};
  a.frames = 600;
  a.queue_samples = 4;
  EXPECT_EQ(tmon::parse_minute_aggregate(tmon::minute_aggregate_json(a)), a);
  tmon::MinuteAggregate empty;
  empty.camera_id = "c";
  EXPECT_EQ(tmon::parse_minute_aggregate(tmon::minute_aggregate_json(empty)), empty);
}
