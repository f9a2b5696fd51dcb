#include <gtest/gtest.h>

#include <algorithm>

#include "builders.hpp"
#include "scenes.hpp"
#include "trafficmon/anomaly.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/evaluation.hpp"
#include "trafficmon/simulator.hpp"

namespace tmon = trafficmon;
using tmon::AnomalyStatus;
using tmon::RejectionReason;

namespace {

std::vector<tmon::SpeedSample> samples(double speed, int from_s, int to_s,
                                       std::optional<bool> frozen = std::nullopt) {
  std::vector<tmon::SpeedSample> out;
  for (int t = from_s; t <= to_s; ++t) {
    tmon::SpeedSample s;
    s.track_id = 1;
    s.timestamp_ms = t * 1000;
    s.speed_px_s = speed;
    s.location = {100, 100};
    s.direction = tmon::Direction::kEast;
    s.digest_unchanged = frozen;
    out.push_back(s);
  }
  return out;
}

tmon::AnomalyEvent event(std::int64_t track, double x, double y, std::int64_t start_s,
                         tmon::Direction dir = tmon::Direction::kEast,
                         AnomalyStatus status = AnomalyStatus::kConfirmed) {
  tmon::AnomalyEvent e;
  e.camera_id = "c";
  e.track_id = track;
  e.location = {x, y};
  e.direction = dir;
  e.start_ts_ms = start_s * 1000;
  e.end_ts_ms = (start_s + 60) * 1000;
  e.status = status;
  if (status == AnomalyStatus::kConfirmed) e.confirmed_ts_ms = e.start_ts_ms + 30'000;
  return e;
}

std::vector<tmon::AnomalyEvent> confirmed(const std::vector<tmon::AnomalyEvent>& events) {
  std::vector<tmon::AnomalyEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [](const auto& e) { return e.status == AnomalyStatus::kConfirmed; });
  return out;
}

}  // namespace

TEST(Candidates, SlowVehicleOpensAfterTheWindow) {
  const tmon::AnomalyConfig cfg;
  auto s = samples(0.2, 0, 40);
  tmon::CandidateDetector det("c", cfg);
  for (const auto& x : s) {
    const auto opened = det.observe(x);
    if (x.timestamp_ms < 15'000) EXPECT_TRUE(det.events().empty());
    if (x.timestamp_ms == 15'000) EXPECT_TRUE(opened.has_value());
  }
  ASSERT_EQ(det.events().size(), 1u);
  EXPECT_EQ(det.events()[0].start_ts_ms, 0);
  EXPECT_FALSE(det.events()[0].end_ts_ms.has_value());
  EXPECT_EQ(det.events()[0].status, AnomalyStatus::kCandidate);
  EXPECT_FALSE(det.events()[0].rejection_reason.has_value());
}

TEST(Candidates, ShortSlowdownOpensNothing) {
  auto s = samples(0.2, 0, 10);
  const auto fast = samples(5.0, 11, 30);
  s.insert(s.end(), fast.begin(), fast.end());
  EXPECT_TRUE(tmon::update_candidates(s, {}).empty());
}

TEST(Candidates, ClosesWhenSpeedRises) {
  auto s = samples(0.1, 0, 20);
  const auto fast = samples(3.0, 21, 25);
  s.insert(s.end(), fast.begin(), fast.end());
  const auto ev = tmon::update_candidates(s, {});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].end_ts_ms, 21'000);
}

TEST(Candidates, ExactZeroWithUnchangedDigestIsFrozen) {
  const auto ev = tmon::update_candidates(samples(0.0, 0, 40, true), {});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].rejection_reason, RejectionReason::kFrozenFrame);
}

TEST(Candidates, ExactZeroWithoutDigestsIsZeroSpeed) {
  const auto ev = tmon::update_candidates(samples(0.0, 0, 40), {});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].rejection_reason, RejectionReason::kZeroSpeed);
}

TEST(Candidates, SwayingVehicleIsNotFlagged) {
  auto s = samples(0.0, 0, 40, false);
  for (std::size_t i = 0; i < s.size(); i += 3) s[i].speed_px_s = 0.1;
  const auto ev = tmon::update_candidates(s, {});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_FALSE(ev[0].rejection_reason.has_value());
}

TEST(Confirm, FreewayAfterThirtySeconds) {
  const tmon::AnomalyConfig cfg;
  auto c = event(1, 0, 0, 0, tmon::Direction::kEast, AnomalyStatus::kCandidate);
  c.end_ts_ms.reset();
  const auto at35 = tmon::confirm(c, tmon::RoadType::kFreeway, cfg, 35'000);
  EXPECT_EQ(at35.status, AnomalyStatus::kConfirmed);
  EXPECT_EQ(at35.confirmed_ts_ms, 30'000);
  EXPECT_EQ(tmon::confirm(c, tmon::RoadType::kFreeway, cfg, 25'000).status,
            AnomalyStatus::kCandidate);
}

TEST(Confirm, IntersectionPolicies) {
  tmon::AnomalyConfig cfg;
  auto c = event(1, 0, 0, 0, tmon::Direction::kEast, AnomalyStatus::kCandidate);
  c.end_ts_ms.reset();
  const auto rejected = tmon::confirm(c, tmon::RoadType::kIntersection, cfg, 65'000);
  EXPECT_EQ(rejected.status, AnomalyStatus::kRejected);
  EXPECT_EQ(rejected.rejection_reason, RejectionReason::kIntersection);

  cfg.intersection_policy = tmon::IntersectionPolicy::kConfirm60s;
  EXPECT_EQ(tmon::confirm(c, tmon::RoadType::kIntersection, cfg, 65'000).status,
            AnomalyStatus::kConfirmed);
  EXPECT_EQ(tmon::confirm(c, tmon::RoadType::kIntersection, cfg, 45'000).status,
            AnomalyStatus::kCandidate);
}

TEST(Confirm, FlaggedCandidateIsRejected) {
  auto c = event(1, 0, 0, 0, tmon::Direction::kEast, AnomalyStatus::kCandidate);
  c.rejection_reason = RejectionReason::kFrozenFrame;
  const auto r = tmon::confirm(c, tmon::RoadType::kFreeway, {}, 100'000);
  EXPECT_EQ(r.status, AnomalyStatus::kRejected);
  EXPECT_EQ(r.rejection_reason, RejectionReason::kFrozenFrame);
}

TEST(Confirm, ConfigOrderingIsValidated) {
  tmon::AnomalyConfig cfg;
  cfg.confirm_freeway_s = 10;
  EXPECT_THROW(tmon::validate(cfg), tmon::ValidationError);
}

TEST(SuppressAndMerge, NearbyEventsMergeIntoTheEarliest) {
  const auto out = tmon::suppress_and_merge({event(2, 110, 100, 105), event(1, 100, 100, 100)}, {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].track_id, 1);
  EXPECT_EQ(out[0].status, AnomalyStatus::kConfirmed);
  EXPECT_EQ(out[1].status, AnomalyStatus::kRejected);
  EXPECT_EQ(out[1].rejection_reason, RejectionReason::kMerged);
  EXPECT_EQ(confirmed(out).size(), 1u);
}

TEST(SuppressAndMerge, SameSideTwentyMinutesApartBothKept) {
  const auto out = tmon::suppress_and_merge({event(1, 100, 100, 0), event(2, 900, 100, 1200)}, {});
  EXPECT_EQ(confirmed(out).size(), 2u);
}

TEST(SuppressAndMerge, OnePerSideWithinTheWindow) {
  const auto out = tmon::suppress_and_merge(
      {event(1, 100, 100, 0), event(2, 900, 100, 300),
       event(3, 900, 500, 300, tmon::Direction::kWest)},
      {});
  const auto kept = confirmed(out);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].track_id, 1);
  EXPECT_EQ(kept[1].track_id, 3);
}

TEST(SuppressAndMerge, SingleEventUnchanged) {
  const auto e = event(1, 100, 100, 0);
  const auto out = tmon::suppress_and_merge({e}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], e);
}

TEST(SuppressAndMerge, FrozenAndZeroSpeedEventsAreDropped) {
  auto frozen = event(1, 100, 100, 0, tmon::Direction::kEast, AnomalyStatus::kRejected);
  frozen.rejection_reason = RejectionReason::kFrozenFrame;
  auto zero = event(2, 500, 100, 0, tmon::Direction::kEast, AnomalyStatus::kRejected);
  zero.rejection_reason = RejectionReason::kZeroSpeed;
  EXPECT_TRUE(tmon::suppress_and_merge({frozen, zero}, {}).empty());
}

TEST(SuppressAndMergeProperty, IdempotentAndNeverInventsEvents) {
  tmon::testing::TestRng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<tmon::AnomalyEvent> events;
    const int n = rng.integer(0, 12);
    for (int i = 0; i < n; ++i) {
      auto e = event(i, rng.uniform(0, 300), rng.uniform(0, 300), rng.integer(0, 3600),
                     tmon::kAllDirections[static_cast<std::size_t>(rng.integer(0, 3))],
                     rng.chance(0.8) ? AnomalyStatus::kConfirmed : AnomalyStatus::kRejected);
      if (e.status == AnomalyStatus::kRejected) {
        e.rejection_reason = rng.chance(0.5) ? RejectionReason::kFrozenFrame : RejectionReason::kIntersection;
      }
      events.push_back(e);
    }
    const auto once = tmon::suppress_and_merge(events, {});
    EXPECT_EQ(tmon::suppress_and_merge(once, {}), once);
    for (const auto& out : once) {
      EXPECT_TRUE(std::any_of(events.begin(), events.end(), [&](const auto& in) {
        return in.start_ts_ms == out.start_ts_ms && in.location == out.location;
      }));
    }
    // Kept confirmed events are pairwise far apart or outside the window.
    const auto kept = confirmed(once);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].direction == kept[j].direction)
          EXPECT_GE(std::abs(kept[i].start_ts_ms - kept[j].start_ts_ms), 15 * 60'000);
  }
}

TEST(AnomalyExport, RoundTrip) {
  auto e = event(7, 12.5, 99.25, 42);
  auto open = event(8, 1, 2, 3, tmon::Direction::kNorth, AnomalyStatus::kCandidate);
  open.end_ts_ms.reset();
  open.direction.reset();
  auto rejected = event(9, 1, 2, 3, tmon::Direction::kSouth, AnomalyStatus::kRejected);
  rejected.rejection_reason = RejectionReason::kIntersection;
  const std::string text = tmon::format_anomaly_event(e) + "\n" + tmon::format_anomaly_event(open) +
                           "\n" + tmon::format_anomaly_event(rejected) + "\n";
  EXPECT_EQ(tmon::parse_anomaly_events(text),
            (std::vector<tmon::AnomalyEvent>{e, open, rejected}));
}

TEST(AnomalyPipeline, StallIsConfirmedNearItsTrueStart) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("stall", 3));
  const auto report = tmon::detect_anomalies(sc.frames, sc.truth.camera_id, {});
  EXPECT_EQ(report.road_type, tmon::RoadType::kFreeway);
  const auto found = confirmed(report.events);
  ASSERT_EQ(found.size(), 1u);
  ASSERT_EQ(sc.truth.anomalies.size(), 1u);
  EXPECT_LE(std::abs(found[0].start_ts_ms - sc.truth.anomalies[0].start_ts_ms), 10'000);
  ASSERT_TRUE(found[0].end_ts_ms);
  EXPECT_GE(*found[0].end_ts_ms - found[0].start_ts_ms, 30'000);
}

TEST(AnomalyPipeline, FrozenVideoRaisesNoAnomaly) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("frozen", 4));
  const auto report = tmon::detect_anomalies(sc.frames, sc.truth.camera_id, {});
  EXPECT_TRUE(confirmed(report.events).empty());

  // The frozen window did produce candidates; they were flagged.
  tmon::AnomalyMonitor monitor(sc.truth.camera_id, {});
  tmon::Tracker tracker{tmon::IouTrackerConfig{}};
  for (const auto& f : sc.frames) monitor.observe(f, tracker.step(f));
  monitor.finish(sc.frames.back().timestamp_ms);
  const auto& raw = monitor.raw_events();
  ASSERT_FALSE(raw.empty());
  for (const auto& e : raw) {
    EXPECT_EQ(e.rejection_reason, RejectionReason::kFrozenFrame);
    EXPECT_NE(e.status, AnomalyStatus::kConfirmed);
  }
}

TEST(AnomalyPipeline, IntersectionStallIsRejectedUnderRejectPolicy) {
  auto cfg = tmon::scenario_preset("intersection", 5);
  cfg.stalls = {{0, 60.0, 45.0, tmon::ClassLabel::kCar, 0.3}};
  const auto sc = tmon::generate_scenario(cfg);
  const auto report = tmon::detect_anomalies(sc.frames, sc.truth.camera_id, {});
  EXPECT_EQ(report.road_type, tmon::RoadType::kIntersection);
  EXPECT_TRUE(confirmed(report.events).empty());
  EXPECT_TRUE(std::any_of(report.events.begin(), report.events.end(), [](const auto& e) {
    return e.rejection_reason == RejectionReason::kIntersection;
  }));

  tmon::AnomalyRunOptions lenient;
  lenient.monitor.anomaly.intersection_policy = tmon::IntersectionPolicy::kConfirm60s;
  EXPECT_EQ(confirmed(tmon::detect_anomalies(sc.frames, sc.truth.camera_id, lenient).events).size(),
            0u);  // 45 s stall is below the 60 s rule
}

TEST(AnomalyPipeline, ConfirmedFreewayEventsLastAtLeastTheThreshold) {
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    auto cfg = tmon::scenario_preset("stall", seed);
    cfg.stalls.push_back({1, 100.0, 35.0, tmon::ClassLabel::kTruck, 0.3});
    const auto sc = tmon::generate_scenario(cfg);
    const auto report = tmon::detect_anomalies(sc.frames, sc.truth.camera_id, {});
    const auto found = confirmed(report.events);
    EXPECT_EQ(found.size(), 2u) << "seed " << seed;
    for (const auto& e : found) EXPECT_GE(e.duration_ms(*e.end_ts_ms), 30'000);
  }
}
