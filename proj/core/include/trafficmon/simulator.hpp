#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/formats.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

// Deterministic generator. The engine is mt19937_64, whose output the
// standard fixes; distributions are done by hand because the standard
// library's are implementation-defined.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double sigma = 1.0);
  double exponential(double rate);
  bool bernoulli(double p);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

struct LaneSpec {
  std::string name;
  std::vector<Point> polyline;  // travel order
  Direction direction = Direction::kEast;
  // Poisson arrival rate per class, vehicles per minute (kAllClasses order).
  std::array<double, kNumClasses> rate_per_min{};
  double speed_px_s = 120.0;
};

struct StallSpec {
  int lane = 0;
  double start_s = 0.0;
  double duration_s = 0.0;
  ClassLabel class_label = ClassLabel::kCar;
  // Position along the lane where the vehicle halts, as a fraction of the
  // polyline length.
  double position = 0.5;
};

struct FrozenWindowSpec {
  double start_s = 0.0;
  double duration_s = 0.0;
};

struct QueuePeak {
  int start_minute = 0;  // minute of day, inclusive
  int end_minute = 0;    // exclusive
  double pixel_length = 0.0;
  std::vector<int> days;  // day offsets the peak occurs on; empty = every day
};

// Time-of-day PL curve: base level plus rectangular peaks, with gaussian
// noise, one sample per sample_period_s.
struct QueueProfile {
  int days = 7;
  std::int64_t first_day = 0;  // days since 1970-01-01
  int sample_period_s = 60;
  double base_pixel_length = 20.0;
  double noise_sigma = 0.0;
  std::vector<QueuePeak> peaks;
};

struct NoiseConfig {
  double center_jitter_sigma_px = 0.0;
  double dropout_prob = 0.0;
  double duplicate_prob = 0.0;
  double duplicate_iou_min = 0.7;
  double score_min = 0.9;
  double score_max = 1.0;
};

void validate(const NoiseConfig& noise);

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::string camera_id = "cam0";
  double duration_s = 60.0;
  double frame_rate_fps = 10.0;
  std::int32_t width = 1280;
  std::int32_t height = 720;
  std::int64_t start_ts_ms = 0;
  std::vector<LaneSpec> lanes;
  std::vector<StallSpec> stalls;
  std::vector<FrozenWindowSpec> frozen_windows;
  std::vector<CountingLine> counting_lines;
  std::optional<QueueProfile> queue_profile;
  NoiseConfig noise;
  bool embeddings = true;
  std::size_t embedding_dim = 16;
  // Spawns that would overlap scheduled traffic are retried one frame later
  // for at most this long, then dropped.
  double max_spawn_delay_s = 30.0;
};

// Throws ValidationError on negative rates, stalls or frozen windows outside
// the duration, probabilities out of range, or degenerate lanes.
void validate(const ScenarioConfig& cfg);

struct Scenario {
  std::vector<FrameDetections> frames;
  GroundTruth truth;
};

// Class box size (w, h) for a vehicle travelling horizontally; vertical
// lanes swap the two.
std::pair<double, double> class_box_size(ClassLabel cls);
// Speed actually used for a class on a lane: pedestrians and cyclists are
// capped so a box never moves more than 0.3 of its length per frame.
double class_speed(const LaneSpec& lane, ClassLabel cls, double frame_rate_fps);

Scenario generate_scenario(const ScenarioConfig& cfg);

// Independently per detection: dropped with dropout_prob, otherwise
// jittered and, with duplicate_prob, followed by a lower-score copy whose
// IOU with it is at least duplicate_iou_min. Frame digests are kept.
std::vector<FrameDetections> inject_noise(const std::vector<FrameDetections>& frames,
                                          const NoiseConfig& noise, std::uint64_t seed);

// PL samples for a queue profile (one per sample period per day).
std::vector<QueueSample> generate_queue_samples(const QueueProfile& profile,
                                                const std::string& camera_id,
                                                std::uint64_t seed);

// True when the profile puts a peak on (day offset, minute of day).
bool queue_peak_at(const QueueProfile& profile, int day_offset, int minute_of_day);

struct QueueMaskSample {
  QueueSample truth;  // pixel_length = exact pixel diameter of the mask
  MaskEncoding mask;
  std::int32_t width = 0;
  std::int32_t height = 0;
};

// Elongated axis-aligned rectangular queue masks with known diameter.
std::vector<QueueMaskSample> generate_queue_masks(std::size_t count, std::int32_t width,
                                                  std::int32_t height,
                                                  const std::string& camera_id,
                                                  std::uint64_t seed);
// Queue-sample line carrying the mask ({"cam","ts_ms","mask","size"}).
std::string format_queue_mask_sample(const QueueMaskSample& sample);

// Named scenarios: "freeway", "intersection", "stall", "frozen", "busy".
ScenarioConfig scenario_preset(std::string_view name, std::uint64_t seed);
std::vector<std::string> scenario_preset_names();

ScenarioConfig parse_scenario_config(std::string_view json_text);
std::string scenario_config_json(const ScenarioConfig& cfg);

}  // namespace trafficmon
