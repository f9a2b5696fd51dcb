#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "scenes.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/evaluation.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/simulator.hpp"

namespace tmon = trafficmon;

namespace {

std::string log_text(const std::vector<tmon::FrameDetections>& frames) {
  std::ostringstream os;
  tmon::write_detection_log(os, frames);
  return os.str();
}

std::size_t detection_count(const std::vector<tmon::FrameDetections>& frames) {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.detections.size();
  return n;
}

tmon::ScenarioConfig silent_freeway(std::uint64_t seed) {
  auto cfg = tmon::scenario_preset("freeway", seed);
  for (auto& l : cfg.lanes) l.rate_per_min = {};
  return cfg;
}

}  // namespace

TEST(Simulator, ZeroRatesGiveNoDetectionsAndEmptyTruth) {
  const auto sc = tmon::generate_scenario(silent_freeway(1));
  EXPECT_EQ(detection_count(sc.frames), 0u);
  EXPECT_TRUE(sc.truth.tracks.empty());
  EXPECT_TRUE(sc.truth.counts.empty());
  EXPECT_TRUE(sc.truth.anomalies.empty());
}

TEST(Simulator, OneVehicleCrossingOneLineCountsOne) {
  auto cfg = silent_freeway(2);
  cfg.duration_s = 60.0;
  // A lone vehicle (the stall spec is the only spawn) that pauses briefly
  // before the line and drives on.
  cfg.stalls = {{0, 5.0, 1.0, tmon::ClassLabel::kCar, 0.3}};
  const auto sc = tmon::generate_scenario(cfg);
  ASSERT_EQ(sc.truth.tracks.size(), 1u);
  EXPECT_EQ(sc.truth.line_total("mid"), 1);
}

TEST(Simulator, StallGivesExactlyOneAnomalyAtItsStart) {
  const auto cfg = tmon::scenario_preset("stall", 3);
  ASSERT_EQ(cfg.stalls.size(), 1u);
  EXPECT_EQ(cfg.stalls[0].start_s, 60.0);
  EXPECT_EQ(cfg.stalls[0].duration_s, 45.0);
  const auto sc = tmon::generate_scenario(cfg);
  ASSERT_EQ(sc.truth.anomalies.size(), 1u);
  EXPECT_EQ(sc.truth.anomalies[0].start_ts_ms, 60'000);
  EXPECT_EQ(sc.truth.anomalies[0].end_ts_ms, 105'000);
}

TEST(Simulator, InvalidConfigsAreRejected) {
  auto cfg = tmon::scenario_preset("freeway", 0);
  cfg.lanes[0].rate_per_min[2] = -1;
  EXPECT_THROW(tmon::generate_scenario(cfg), tmon::ValidationError);
  cfg = tmon::scenario_preset("freeway", 0);
  cfg.stalls = {{0, 230.0, 20.0, tmon::ClassLabel::kCar, 0.5}};
  EXPECT_THROW(tmon::generate_scenario(cfg), tmon::ValidationError);
  cfg = tmon::scenario_preset("freeway", 0);
  cfg.frozen_windows = {{-1.0, 5.0}};
  EXPECT_THROW(tmon::generate_scenario(cfg), tmon::ValidationError);
  tmon::NoiseConfig noise;
  noise.dropout_prob = 1.5;
  EXPECT_THROW(tmon::validate(noise), tmon::ValidationError);
  EXPECT_THROW(tmon::scenario_preset("nowhere", 0), tmon::ValidationError);
}

TEST(Simulator, SameSeedSameBytesDifferentSeedDifferentBytes) {
  for (const auto& name : tmon::scenario_preset_names()) {
    if (name == "queue_week" || name == "busy") continue;
    const auto a = tmon::generate_scenario(tmon::scenario_preset(name, 11));
    const auto b = tmon::generate_scenario(tmon::scenario_preset(name, 11));
    const auto c = tmon::generate_scenario(tmon::scenario_preset(name, 12));
    EXPECT_EQ(log_text(a.frames), log_text(b.frames)) << name;
    EXPECT_EQ(tmon::format_ground_truth(a.truth), tmon::format_ground_truth(b.truth)) << name;
    EXPECT_NE(log_text(a.frames), log_text(c.frames)) << name;
  }
}

TEST(Simulator, LogRoundTripsThroughTheReader) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("intersection", 4));
  const auto text = log_text(sc.frames);
  EXPECT_EQ(tmon::parse_detection_log(text), sc.frames);
  EXPECT_EQ(tmon::parse_ground_truth(tmon::format_ground_truth(sc.truth)).tracks.size(),
            sc.truth.tracks.size());
}

TEST(Simulator, ConfigJsonRoundTrip) {
  for (const auto& name : tmon::scenario_preset_names()) {
    const auto cfg = tmon::scenario_preset(name, 5);
    const auto json = tmon::scenario_config_json(cfg);
    EXPECT_EQ(tmon::scenario_config_json(tmon::parse_scenario_config(json)), json) << name;
  }
}

TEST(Simulator, FrozenWindowRepeatsBoxesAndDigest) {
  const auto cfg = tmon::scenario_preset("frozen", 6);
  const auto sc = tmon::generate_scenario(cfg);
  ASSERT_EQ(sc.truth.frozen_windows.size(), 1u);
  const auto w = sc.truth.frozen_windows[0];
  int frozen = 0;
  for (std::size_t i = 1; i < sc.frames.size(); ++i) {
    const auto& f = sc.frames[i];
    const auto& prev = sc.frames[i - 1];
    const bool inside = f.timestamp_ms > w.start_ts_ms && f.timestamp_ms < w.end_ts_ms;
    if (!inside) continue;
    ++frozen;
    EXPECT_EQ(f.frame_digest, prev.frame_digest);
    ASSERT_EQ(f.detections.size(), prev.detections.size());
    for (std::size_t d = 0; d < f.detections.size(); ++d) EXPECT_EQ(f.detections[d].box, prev.detections[d].box);
  }
  EXPECT_GT(frozen, 300);
  // Outside frozen windows the digest changes every frame.
  EXPECT_NE(sc.frames[10].frame_digest, sc.frames[11].frame_digest);
}

TEST(Simulator, NoiseFreeTrackerRecoversTheTruthPartition) {
  for (const char* name : {"freeway", "intersection", "stall"}) {
    for (std::uint64_t seed = 20; seed < 23; ++seed) {
      const auto sc = tmon::generate_scenario(tmon::scenario_preset(name, seed));
      const auto tracks = tmon::run_tracker(sc.frames, tmon::Tracker{tmon::IouTrackerConfig{}});
      EXPECT_EQ(tracks.size(), sc.truth.tracks.size()) << name << " " << seed;
      EXPECT_DOUBLE_EQ(tmon::switch_rate(tracks, sc.truth.tracks), 0.0) << name << " " << seed;
      // Same multiset of detection sequences.
      auto boxes = [](const std::vector<tmon::Track>& ts) {
        std::vector<std::vector<std::pair<std::int64_t, double>>> out;
        for (const auto& t : ts) {
          std::vector<std::pair<std::int64_t, double>> seq;
          for (const auto& d : t.detections) seq.emplace_back(d.frame_index, d.box.x);
          out.push_back(seq);
        }
        std::sort(out.begin(), out.end());
        return out;
      };
      EXPECT_EQ(boxes(tracks), boxes(sc.truth.tracks)) << name << " " << seed;
    }
  }
}

TEST(InjectNoise, ZeroNoiseIsIdentity) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("freeway", 7));
  EXPECT_EQ(tmon::inject_noise(sc.frames, {}, 1), sc.frames);
}

TEST(InjectNoise, FullDropoutEmptiesTheLog) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("freeway", 7));
  tmon::NoiseConfig n;
  n.dropout_prob = 1.0;
  const auto out = tmon::inject_noise(sc.frames, n, 1);
  EXPECT_EQ(out.size(), sc.frames.size());
  EXPECT_EQ(detection_count(out), 0u);
}

TEST(InjectNoise, FullDuplicationPairsEveryBox) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("freeway", 8));
  tmon::NoiseConfig n;
  n.duplicate_prob = 1.0;
  n.duplicate_iou_min = 0.7;
  const auto out = tmon::inject_noise(sc.frames, n, 2);
  ASSERT_EQ(out.size(), sc.frames.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_EQ(out[i].detections.size(), 2 * sc.frames[i].detections.size());
    for (std::size_t d = 0; d < out[i].detections.size(); d += 2) {
      EXPECT_GE(tmon::iou(out[i].detections[d].box, out[i].detections[d + 1].box), 0.7);
      EXPECT_EQ(out[i].detections[d].class_label, out[i].detections[d + 1].class_label);
    }
    EXPECT_EQ(out[i].frame_digest, sc.frames[i].frame_digest);
  }
}

TEST(InjectNoise, DeterministicPerSeed) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("freeway", 9));
  tmon::NoiseConfig n;
  n.center_jitter_sigma_px = 2.0;
  n.dropout_prob = 0.1;
  n.duplicate_prob = 0.2;
  EXPECT_EQ(tmon::inject_noise(sc.frames, n, 5), tmon::inject_noise(sc.frames, n, 5));
  EXPECT_NE(tmon::inject_noise(sc.frames, n, 5), tmon::inject_noise(sc.frames, n, 6));
}

TEST(QueueSimulation, SamplesFollowTheProfile) {
  tmon::QueueProfile p;
  p.days = 2;
  p.first_day = 100;
  p.sample_period_s = 60;
  p.base_pixel_length = 10;
  p.peaks = {{60, 120, 90.0, {1}}};
  const auto s = tmon::generate_queue_samples(p, "q", 1);
  EXPECT_EQ(s.size(), 2u * 1440u);
  for (const auto& x : s) {
    const int day = static_cast<int>(tmon::day_index(x.timestamp_ms) - p.first_day);
    const int minute = tmon::time_of_day_bin(x.timestamp_ms, 1);
    EXPECT_DOUBLE_EQ(x.pixel_length, tmon::queue_peak_at(p, day, minute) ? 90.0 : 10.0);
  }
  EXPECT_TRUE(tmon::queue_peak_at(p, 1, 60));
  EXPECT_FALSE(tmon::queue_peak_at(p, 1, 120));
  EXPECT_FALSE(tmon::queue_peak_at(p, 0, 60));
}

TEST(QueueSimulation, MaskTruthIsTheirDiameter) {
  for (const auto& m : tmon::generate_queue_masks(20, 200, 100, "q", 3)) {
    const auto bm = tmon::decode_mask(m.mask, m.width, m.height);
    EXPECT_NEAR(tmon::mask_pixel_length(bm), m.truth.pixel_length, 1e-9);
  }
}

TEST(SimRng, HandRolledDistributionsAreStable) {
  tmon::SimRng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_EQ(a.normal(), b.normal());
  EXPECT_GT(a.exponential(2.0), 0.0);
}
