#include "trafficmon/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

SimRng::SimRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SimRng::next() { return engine_(); }

double SimRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SimRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SimRng::normal(double mean, double sigma) {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return mean + sigma * z;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return mean + sigma * r * std::cos(theta);
}

double SimRng::exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

bool SimRng::bernoulli(double p) { return p > 0.0 && uniform() < p; }

// ---------------------------------------------------------------------------

void validate(const NoiseConfig& n) {
  if (!(n.center_jitter_sigma_px >= 0.0)) throw ValidationError("jitter sigma must be >= 0");
  if (!(n.dropout_prob >= 0.0 && n.dropout_prob <= 1.0)) {
    throw ValidationError("dropout_prob must be in [0, 1]");
  }
  if (!(n.duplicate_prob >= 0.0 && n.duplicate_prob <= 1.0)) {
    throw ValidationError("duplicate_prob must be in [0, 1]");
  }
  if (!(n.duplicate_iou_min > 0.0 && n.duplicate_iou_min <= 1.0)) {
    throw ValidationError("duplicate_iou_min must be in (0, 1]");
  }
  if (!(n.score_min >= 0.0 && n.score_min <= n.score_max && n.score_max <= 1.0)) {
    throw ValidationError("score range must satisfy 0 <= min <= max <= 1");
  }
}

namespace {

double polyline_length(const std::vector<Point>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    len += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  return len;
}

}  // namespace

void validate(const ScenarioConfig& cfg) {
  if (!(cfg.duration_s >= 0.0)) throw ValidationError("duration_s must be >= 0");
  if (!(cfg.frame_rate_fps > 0.0)) throw ValidationError("frame_rate_fps must be > 0");
  if (cfg.width <= 0 || cfg.height <= 0) throw ValidationError("image size must be positive");
  if (cfg.embeddings && cfg.embedding_dim == 0) throw ValidationError("embedding_dim must be > 0");
  if (!(cfg.max_spawn_delay_s >= 0.0)) throw ValidationError("max_spawn_delay_s must be >= 0");
  for (const auto& lane : cfg.lanes) {
    if (lane.polyline.size() < 2 || polyline_length(lane.polyline) <= 0.0) {
      throw ValidationError("lane '" + lane.name + "' needs a polyline of positive length");
    }
    if (!(lane.speed_px_s > 0.0)) throw ValidationError("lane speed must be > 0");
    for (double r : lane.rate_per_min) {
      if (!(r >= 0.0)) throw ValidationError("spawn rates must be >= 0");
    }
  }
  for (const auto& s : cfg.stalls) {
    if (s.lane < 0 || static_cast<std::size_t>(s.lane) >= cfg.lanes.size()) {
      throw ValidationError("stall references an unknown lane");
    }
    if (!(s.start_s >= 0.0 && s.duration_s > 0.0 && s.start_s + s.duration_s <= cfg.duration_s)) {
      throw ValidationError("stall window must lie inside the scenario duration");
    }
    if (!(s.position > 0.0 && s.position < 1.0)) {
      throw ValidationError("stall position must be in (0, 1)");
    }
  }
  for (const auto& w : cfg.frozen_windows) {
    if (!(w.start_s >= 0.0 && w.duration_s > 0.0 && w.start_s + w.duration_s <= cfg.duration_s)) {
      throw ValidationError("frozen window must lie inside the scenario duration");
    }
  }
  for (const auto& l : cfg.counting_lines) validate(l);
  if (cfg.queue_profile) {
    const auto& q = *cfg.queue_profile;
    if (q.days < 0 || q.sample_period_s <= 0) throw ValidationError("invalid queue profile");
    for (const auto& p : q.peaks) {
      if (p.start_minute < 0 || p.end_minute > 1440 || p.start_minute >= p.end_minute) {
        throw ValidationError("queue peak minutes must satisfy 0 <= start < end <= 1440");
      }
    }
  }
  validate(cfg.noise);
}

std::pair<double, double> class_box_size(ClassLabel cls) {
  switch (cls) {
    case ClassLabel::kPedestrian: return {10.0, 24.0};
    case ClassLabel::kCyclist: return {16.0, 24.0};
    case ClassLabel::kCar: return {40.0, 24.0};
    case ClassLabel::kBus: return {80.0, 30.0};
    case ClassLabel::kTruck: return {70.0, 30.0};
  }
  return {40.0, 24.0};
}

double class_speed(const LaneSpec& lane, ClassLabel cls, double fps) {
  return std::min(lane.speed_px_s, 0.3 * class_box_size(cls).first * fps);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kSeparationPx = 2.0;

class LanePath {
 public:
  explicit LanePath(const std::vector<Point>& pts) : pts_(pts) {
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cum_.push_back(cum_.back() + std::hypot(pts_[i].x - pts_[i - 1].x, pts_[i].y - pts_[i - 1].y));
    }
  }
  double length() const { return cum_.back(); }
  Point at(double s) const {
    s = std::clamp(s, 0.0, length());
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    if (i >= cum_.size()) i = cum_.size() - 1;
    const std::size_t a = i - 1;
    const double seg = cum_[i] - cum_[a];
    const double f = seg > 0.0 ? (s - cum_[a]) / seg : 0.0;
    return {pts_[a].x + (pts_[i].x - pts_[a].x) * f, pts_[a].y + (pts_[i].y - pts_[a].y) * f};
  }

 private:
  std::vector<Point> pts_;
  std::vector<double> cum_;
};

struct Stall {
  double start_s;
  double duration_s;
};

struct Vehicle {
  std::int64_t id = 0;
  int lane = 0;
  ClassLabel cls = ClassLabel::kCar;
  double t0 = 0.0;  // time at arc length 0
  double speed = 0.0;
  std::optional<Stall> stall;
  double w = 0.0, h = 0.0;
  std::int64_t first_frame = 0;
  std::vector<BoundingBox> boxes;  // frames first_frame .. first_frame + size - 1

  std::int64_t last_frame() const {
    return first_frame + static_cast<std::int64_t>(boxes.size()) - 1;
  }
  const BoundingBox* box_at(std::int64_t f) const {
    if (f < first_frame || f > last_frame()) return nullptr;
    return &boxes[static_cast<std::size_t>(f - first_frame)];
  }
};

double arc_at(const Vehicle& v, double t) {
  if (!v.stall || t < v.stall->start_s) return v.speed * (t - v.t0);
  if (t < v.stall->start_s + v.stall->duration_s) return v.speed * (v.stall->start_s - v.t0);
  return v.speed * (t - v.t0 - v.stall->duration_s);
}

// Fills boxes for every frame where the vehicle is on its path. Returns the
// time the vehicle leaves the path.
double trace(Vehicle& v, const LanePath& path, double fps, std::int64_t num_frames) {
  v.boxes.clear();
  const double exit_t =
      v.t0 + path.length() / v.speed + (v.stall ? v.stall->duration_s : 0.0);
  std::int64_t f = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(v.t0 * fps - 1e-9)));
  v.first_frame = f;
  for (; f < num_frames; ++f) {
    const double s = arc_at(v, static_cast<double>(f) / fps);
    if (s < 0.0) {
      v.first_frame = f + 1;
      continue;
    }
    if (s > path.length()) break;
    const Point c = path.at(s);
    v.boxes.push_back({c.x - v.w / 2.0, c.y - v.h / 2.0, v.w, v.h});
  }
  return exit_t;
}

bool separated(const BoundingBox& a, const BoundingBox& b) {
  return a.x + a.w + kSeparationPx <= b.x || b.x + b.w + kSeparationPx <= a.x ||
         a.y + a.h + kSeparationPx <= b.y || b.y + b.h + kSeparationPx <= a.y;
}

// Boxes of the two vehicles must stay apart at equal and adjacent frames, so
// no tracker can link one to the other.
bool conflicts(const Vehicle& a, const Vehicle& b) {
  if (a.boxes.empty() || b.boxes.empty()) return false;
  const std::int64_t lo = std::max(a.first_frame, b.first_frame - 1);
  const std::int64_t hi = std::min(a.last_frame(), b.last_frame() + 1);
  for (std::int64_t f = lo; f <= hi; ++f) {
    const BoundingBox* ba = a.box_at(f);
    for (std::int64_t g = f - 1; g <= f + 1; ++g) {
      const BoundingBox* bb = b.box_at(g);
      if (bb != nullptr && !separated(*ba, *bb)) return true;
    }
  }
  return false;
}

bool fully_inside(const BoundingBox& b, std::int32_t w, std::int32_t h) {
  return b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= w && b.y + b.h <= h;
}

std::vector<double> random_unit_vector(SimRng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t frame_digest(std::uint64_t seed, const FrameDetections& f) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, &seed, sizeof(seed));
  h = fnv1a(h, &f.frame_index, sizeof(f.frame_index));
  for (const auto& d : f.detections) {
    const auto cls = static_cast<std::uint8_t>(d.class_label);
    h = fnv1a(h, &cls, 1);
    const double vals[4] = {d.box.x, d.box.y, d.box.w, d.box.h};
    h = fnv1a(h, vals, sizeof(vals));
  }
  return h;
}

// Side of p relative to the line, positive toward positive_dir.
double signed_side(Point p, const CountingLine& line) {
  const double lx = line.p2.x - line.p1.x, ly = line.p2.y - line.p1.y;
  double nx = -ly, ny = lx;
  const Point d = unit_vector(line.positive_dir);
  if (nx * d.x + ny * d.y < 0.0) {
    nx = -nx;
    ny = -ny;
  }
  return (p.x - line.p1.x) * nx + (p.y - line.p1.y) * ny;
}

// Parametric crossing test, kept separate from the counting module so the
// truth does not share code with the counter under test.
std::optional<CrossingSign> truth_crossing(Point a, Point b, const CountingLine& line) {
  const double da = signed_side(a, line), db = signed_side(b, line);
  const bool a_pos = da > 0.0, b_pos = db > 0.0;
  if (a_pos == b_pos) return std::nullopt;
  const double t = da / (da - db);
  const Point q{a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t};
  const double lx = line.p2.x - line.p1.x, ly = line.p2.y - line.p1.y;
  const double u = ((q.x - line.p1.x) * lx + (q.y - line.p1.y) * ly) / (lx * lx + ly * ly);
  if (u < 0.0 || u > 1.0) return std::nullopt;
  return b_pos ? CrossingSign::kPositive : CrossingSign::kNegative;
}

std::int64_t frame_ts(const ScenarioConfig& cfg, std::int64_t f) {
  return cfg.start_ts_ms +
         static_cast<std::int64_t>(std::llround(static_cast<double>(f) * 1000.0 / cfg.frame_rate_fps));
}

bool is_vertical(Direction d) { return d == Direction::kNorth || d == Direction::kSouth; }

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  const double fps = cfg.frame_rate_fps;
  const auto num_frames = static_cast<std::int64_t>(std::floor(cfg.duration_s * fps + 1e-9));
  std::vector<LanePath> paths;
  for (const auto& lane : cfg.lanes) paths.emplace_back(lane.polyline);

  SimRng rng(cfg.seed);
  auto make_vehicle = [&](int lane, ClassLabel cls) {
    Vehicle v;
    v.lane = lane;
    v.cls = cls;
    v.speed = class_speed(cfg.lanes[lane], cls, fps);
    auto [w, h] = class_box_size(cls);
    if (is_vertical(cfg.lanes[lane].direction)) std::swap(w, h);
    v.w = w;
    v.h = h;
    return v;
  };

  std::vector<Vehicle> scheduled;
  for (const auto& s : cfg.stalls) {
    Vehicle v = make_vehicle(s.lane, s.class_label);
    const double stop_arc = s.position * paths[s.lane].length();
    v.t0 = s.start_s - stop_arc / v.speed;
    v.stall = Stall{s.start_s, s.duration_s};
    trace(v, paths[s.lane], fps, num_frames);
    for (const auto& other : scheduled) {
      if (conflicts(v, other)) throw ValidationError("stalled vehicles overlap each other");
    }
    scheduled.push_back(std::move(v));
  }

  struct Arrival {
    double t;
    int lane;
    std::size_t cls;
  };
  std::vector<Arrival> arrivals;
  for (std::size_t l = 0; l < cfg.lanes.size(); ++l) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double rate_s = cfg.lanes[l].rate_per_min[c] / 60.0;
      if (rate_s <= 0.0) continue;
      for (double t = rng.exponential(rate_s); t < cfg.duration_s; t += rng.exponential(rate_s)) {
        arrivals.push_back({t, static_cast<int>(l), c});
      }
    }
  }
  std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    return std::tie(a.t, a.lane, a.cls) < std::tie(b.t, b.lane, b.cls);
  });

  const double last_frame_t = static_cast<double>(num_frames - 1) / fps;
  const auto max_delay_frames = static_cast<int>(std::floor(cfg.max_spawn_delay_s * fps));
  for (const auto& a : arrivals) {
    Vehicle v = make_vehicle(a.lane, kAllClasses[a.cls]);
    // Snap spawns to frame times so retries shift whole frames.
    const double spawn = std::ceil(a.t * fps - 1e-9) / fps;
    for (int delay = 0; delay <= max_delay_frames; ++delay) {
      v.t0 = spawn + delay / fps;
      // Regular traffic must leave the scene before the recording ends.
      if (trace(v, paths[a.lane], fps, num_frames) > last_frame_t) break;
      const bool clash = std::any_of(scheduled.begin(), scheduled.end(),
                                     [&](const Vehicle& o) { return conflicts(v, o); });
      if (!clash) {
        scheduled.push_back(v);
        break;
      }
    }
  }

  std::vector<std::vector<double>> embeddings(scheduled.size());
  for (std::size_t i = 0; i < scheduled.size(); ++i) {
    scheduled[i].id = static_cast<std::int64_t>(i) + 1;
    if (cfg.embeddings) embeddings[i] = random_unit_vector(rng, cfg.embedding_dim);
  }

  Scenario out;
  out.truth.camera_id = cfg.camera_id;
  std::vector<FrameDetections> frames(static_cast<std::size_t>(num_frames));
  for (std::int64_t f = 0; f < num_frames; ++f) {
    frames[f].camera_id = cfg.camera_id;
    frames[f].frame_index = f;
    frames[f].timestamp_ms = frame_ts(cfg, f);
  }

  std::map<std::tuple<std::string, ClassLabel, CrossingSign>, std::int64_t> counts;
  for (std::size_t i = 0; i < scheduled.size(); ++i) {
    const Vehicle& v = scheduled[i];
    Track truth_track;
    truth_track.track_id = v.id;
    truth_track.state = TrackState::kFinished;
    for (std::size_t k = 0; k < v.boxes.size(); ++k) {
      const BoundingBox& box = v.boxes[k];
      if (!fully_inside(box, cfg.width, cfg.height)) continue;
      const std::int64_t f = v.first_frame + static_cast<std::int64_t>(k);
      Detection d;
      d.frame_index = f;
      d.timestamp_ms = frames[f].timestamp_ms;
      d.class_label = v.cls;
      d.box = box;
      d.score = rng.uniform(cfg.noise.score_min, cfg.noise.score_max);
      if (cfg.embeddings) d.embedding = embeddings[i];
      frames[f].detections.push_back(d);
      Detection t = d;
      t.score = 1.0;
      t.embedding.reset();
      truth_track.detections.push_back(std::move(t));
    }
    if (truth_track.detections.empty()) continue;

    for (const auto& line : cfg.counting_lines) {
      const auto& dets = truth_track.detections;
      for (std::size_t k = 1; k < dets.size(); ++k) {
        if (auto sign = truth_crossing(dets[k - 1].box.center(), dets[k].box.center(), line)) {
          ++counts[{line.label, v.cls, *sign}];
          break;
        }
      }
    }
    if (v.stall) {
      const Point stop = paths[v.lane].at(v.speed * (v.stall->start_s - v.t0));
      AnomalyEvent e;
      e.camera_id = cfg.camera_id;
      e.track_id = v.id;
      e.location = stop;
      e.direction = cfg.lanes[v.lane].direction;
      e.start_ts_ms = cfg.start_ts_ms + static_cast<std::int64_t>(std::llround(v.stall->start_s * 1000.0));
      e.end_ts_ms = cfg.start_ts_ms + static_cast<std::int64_t>(std::llround(
                                          (v.stall->start_s + v.stall->duration_s) * 1000.0));
      e.status = AnomalyStatus::kConfirmed;
      out.truth.anomalies.push_back(e);
    }
    out.truth.tracks.push_back(std::move(truth_track));
  }
  for (const auto& [key, n] : counts) {
    out.truth.counts.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  }

  const bool noisy = cfg.noise.center_jitter_sigma_px > 0.0 || cfg.noise.dropout_prob > 0.0 ||
                     cfg.noise.duplicate_prob > 0.0;
  if (noisy) frames = inject_noise(frames, cfg.noise, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& f : frames) f.frame_digest = frame_digest(cfg.seed, f);

  for (const auto& w : cfg.frozen_windows) {
    const auto first = static_cast<std::int64_t>(std::ceil(w.start_s * fps - 1e-9));
    const auto end = static_cast<std::int64_t>(std::ceil((w.start_s + w.duration_s) * fps - 1e-9));
    for (std::int64_t f = std::max<std::int64_t>(first, 1); f < std::min(end, num_frames); ++f) {
      frames[f].detections = frames[f - 1].detections;
      for (auto& d : frames[f].detections) {
        d.frame_index = f;
        d.timestamp_ms = frames[f].timestamp_ms;
      }
      frames[f].frame_digest = frames[f - 1].frame_digest;
    }
    out.truth.frozen_windows.push_back(
        {cfg.start_ts_ms + static_cast<std::int64_t>(std::llround(w.start_s * 1000.0)),
         cfg.start_ts_ms +
             static_cast<std::int64_t>(std::llround((w.start_s + w.duration_s) * 1000.0))});
  }

  if (cfg.queue_profile) {
    out.truth.queue = generate_queue_samples(*cfg.queue_profile, cfg.camera_id,
                                             cfg.seed ^ 0x51ed270b7a3c4e1fULL);
  }
  out.frames = std::move(frames);
  return out;
}

std::vector<FrameDetections> inject_noise(const std::vector<FrameDetections>& frames,
                                          const NoiseConfig& noise, std::uint64_t seed) {
  validate(noise);
  SimRng rng(seed);
  std::vector<FrameDetections> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    FrameDetections nf = f;
    nf.detections.clear();
    for (const auto& d : f.detections) {
      if (rng.bernoulli(noise.dropout_prob)) continue;
      Detection kept = d;
      if (noise.center_jitter_sigma_px > 0.0) {
        kept.box.x += rng.normal(0.0, noise.center_jitter_sigma_px);
        kept.box.y += rng.normal(0.0, noise.center_jitter_sigma_px);
      }
      nf.detections.push_back(kept);
      if (rng.bernoulli(noise.duplicate_prob)) {
        Detection dup = kept;
        dup.box = kept.box;  // fallback: exact copy
        for (int attempt = 0; attempt < 64; ++attempt) {
          BoundingBox b = kept.box;
          const double scale = rng.uniform(0.92, 1.08);
          b.w *= scale;
          b.h *= scale;
          b.x += rng.normal(0.0, 0.05 * kept.box.w) - (b.w - kept.box.w) / 2.0;
          b.y += rng.normal(0.0, 0.05 * kept.box.h) - (b.h - kept.box.h) / 2.0;
          if (iou_unchecked(b, kept.box) >= noise.duplicate_iou_min) {
            dup.box = b;
            break;
          }
        }
        dup.score = kept.score * 0.8;
        nf.detections.push_back(std::move(dup));
      }
    }
    out.push_back(std::move(nf));
  }
  return out;
}

// ---------------------------------------------------------------------------

bool queue_peak_at(const QueueProfile& profile, int day_offset, int minute) {
  for (const auto& p : profile.peaks) {
    if (minute < p.start_minute || minute >= p.end_minute) continue;
    if (p.days.empty() || std::find(p.days.begin(), p.days.end(), day_offset) != p.days.end()) {
      return true;
    }
  }
  return false;
}

namespace {

double peak_length(const QueueProfile& profile, int day_offset, int minute) {
  for (const auto& p : profile.peaks) {
    if (minute < p.start_minute || minute >= p.end_minute) continue;
    if (p.days.empty() || std::find(p.days.begin(), p.days.end(), day_offset) != p.days.end()) {
      return p.pixel_length;
    }
  }
  return profile.base_pixel_length;
}

}  // namespace

std::vector<QueueSample> generate_queue_samples(const QueueProfile& profile,
                                                const std::string& camera_id,
                                                std::uint64_t seed) {
  if (profile.sample_period_s <= 0) throw ValidationError("sample_period_s must be > 0");
  SimRng rng(seed);
  std::vector<QueueSample> out;
  for (int d = 0; d < profile.days; ++d) {
    const std::int64_t day_start = (profile.first_day + d) * kMsPerDay;
    for (int sec = 0; sec < 86400; sec += profile.sample_period_s) {
      double pl = peak_length(profile, d, sec / 60);
      if (profile.noise_sigma > 0.0) pl += rng.normal(0.0, profile.noise_sigma);
      out.push_back({camera_id, day_start + sec * 1000LL, std::max(0.0, pl), std::nullopt});
    }
  }
  return out;
}

std::vector<QueueMaskSample> generate_queue_masks(std::size_t count, std::int32_t width,
                                                  std::int32_t height,
                                                  const std::string& camera_id,
                                                  std::uint64_t seed) {
  if (width < 32 || height < 32) throw ValidationError("mask grid must be at least 32x32");
  SimRng rng(seed);
  auto pick = [&rng](int lo, int hi) {  // inclusive
    return lo + static_cast<int>(std::floor(rng.uniform() * (hi - lo + 1)));
  };
  std::vector<QueueMaskSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    const bool vertical = rng.bernoulli(0.5);
    const int span = vertical ? height : width;
    const int across = vertical ? width : height;
    const int length = pick(span / 4, span - 1);
    const int thickness = pick(4, std::min(24, across - 1));
    const int along0 = pick(0, span - 1 - length);
    const int across0 = pick(0, across - 1 - thickness);
    double x0 = along0, y0 = across0, x1 = along0 + length, y1 = across0 + thickness;
    if (vertical) {
      std::swap(x0, y0);
      std::swap(x1, y1);
    }
    QueueMaskSample s;
    s.width = width;
    s.height = height;
    s.mask.kind = MaskEncoding::Kind::kPolygon;
    s.mask.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    s.truth.camera_id = camera_id;
    s.truth.timestamp_ms = static_cast<std::int64_t>(i) * kMsPerMinute;
    s.truth.pixel_length = std::hypot(x1 - x0, y1 - y0);
    s.truth.mask_id = "mask-" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_queue_mask_sample(const QueueMaskSample& s) {
  codec::json j{{"cam", s.truth.camera_id},
                {"ts_ms", s.truth.timestamp_ms},
                {"mask", codec::to_json(s.mask)},
                {"size", codec::json::array({s.width, s.height})}};
  if (s.truth.mask_id) j["mask_id"] = *s.truth.mask_id;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Presets

namespace {

LaneSpec horizontal_lane(std::string name, double y, bool eastbound, double width,
                         std::array<double, kNumClasses> rates, double speed = 120.0) {
  LaneSpec l;
  l.name = std::move(name);
  l.direction = eastbound ? Direction::kEast : Direction::kWest;
  l.polyline = eastbound ? std::vector<Point>{{-100.0, y}, {width + 100.0, y}}
                         : std::vector<Point>{{width + 100.0, y}, {-100.0, y}};
  l.rate_per_min = rates;
  l.speed_px_s = speed;
  return l;
}

LaneSpec vertical_lane(std::string name, double x, bool southbound, double height,
                       std::array<double, kNumClasses> rates, double speed = 120.0) {
  LaneSpec l;
  l.name = std::move(name);
  l.direction = southbound ? Direction::kSouth : Direction::kNorth;
  l.polyline = southbound ? std::vector<Point>{{x, -100.0}, {x, height + 100.0}}
                          : std::vector<Point>{{x, height + 100.0}, {x, -100.0}};
  l.rate_per_min = rates;
  l.speed_px_s = speed;
  return l;
}

// Rates in kAllClasses order: pedestrian, cyclist, car, bus, truck.
constexpr std::array<double, kNumClasses> kFreewayRates{0.0, 0.0, 6.0, 0.5, 1.5};

ScenarioConfig freeway(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.camera_id = "freeway";
  c.duration_s = 240.0;
  c.lanes = {horizontal_lane("eb", 300.0, true, c.width, kFreewayRates),
             horizontal_lane("wb", 420.0, false, c.width, kFreewayRates)};
  c.counting_lines = {{"mid", {640.3, 250.0}, {640.3, 470.0}, Direction::kEast}};
  return c;
}

}  // namespace

std::vector<std::string> scenario_preset_names() {
  return {"freeway", "intersection", "stall", "frozen", "busy", "queue_week"};
}

ScenarioConfig scenario_preset(std::string_view name, std::uint64_t seed) {
  if (name == "freeway") return freeway(seed);
  if (name == "stall") {
    auto c = freeway(seed);
    c.camera_id = "stall";
    c.duration_s = 180.0;
    c.stalls = {{0, 60.0, 45.0, ClassLabel::kCar, 0.5}};
    return c;
  }
  if (name == "frozen") {
    auto c = freeway(seed);
    c.camera_id = "frozen";
    c.duration_s = 180.0;
    c.frozen_windows = {{60.0, 40.0}};
    return c;
  }
  if (name == "intersection") {
    ScenarioConfig c;
    c.seed = seed;
    c.camera_id = "intersection";
    c.duration_s = 240.0;
    const std::array<double, kNumClasses> rates{0.5, 0.5, 4.0, 0.3, 0.7};
    c.lanes = {horizontal_lane("eb", 330.0, true, c.width, rates),
               horizontal_lane("wb", 390.0, false, c.width, rates),
               vertical_lane("sb", 610.0, true, c.height, rates),
               vertical_lane("nb", 670.0, false, c.height, rates)};
    c.counting_lines = {{"east_exit", {900.3, 300.0}, {900.3, 420.0}, Direction::kEast},
                        {"south_exit", {580.0, 550.3}, {700.0, 550.3}, Direction::kSouth}};
    return c;
  }
  if (name == "busy") {
    ScenarioConfig c;
    c.seed = seed;
    c.camera_id = "busy";
    c.duration_s = 1200.0;
    const std::array<double, kNumClasses> rates{0.0, 0.0, 13.0, 1.0, 2.0};
    for (int i = 0; i < 3; ++i) {
      c.lanes.push_back(horizontal_lane("eb" + std::to_string(i), 200.0 + 60.0 * i, true,
                                        c.width, rates));
      c.lanes.push_back(horizontal_lane("wb" + std::to_string(i), 420.0 + 60.0 * i, false,
                                        c.width, rates));
    }
    c.counting_lines = {{"mid", {640.3, 150.0}, {640.3, 600.0}, Direction::kEast}};
    return c;
  }
  if (name == "queue_week") {
    ScenarioConfig c;
    c.seed = seed;
    c.camera_id = "queue";
    c.duration_s = 0.0;
    QueueProfile q;
    q.days = 7;
    q.first_day = 20454;  // 2026-01-01
    q.base_pixel_length = 20.0;
    q.noise_sigma = 2.0;
    q.peaks = {{420, 540, 200.0, {0, 1, 2, 3}}};
    c.queue_profile = q;
    return c;
  }
  throw ValidationError("unknown scenario preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using codec::json;

json rates_json(const std::array<double, kNumClasses>& rates) {
  json j = json::object();
  for (const auto cls : kAllClasses) j[std::string(to_string(cls))] = rates[index_of(cls)];
  return j;
}

}  // namespace

std::string scenario_config_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["camera_id"] = c.camera_id;
  j["duration_s"] = c.duration_s;
  j["frame_rate_fps"] = c.frame_rate_fps;
  j["width"] = c.width;
  j["height"] = c.height;
  j["start_ts_ms"] = c.start_ts_ms;
  j["lanes"] = json::array();
  for (const auto& l : c.lanes) {
    json pts = json::array();
    for (const auto& p : l.polyline) pts.push_back({p.x, p.y});
    j["lanes"].push_back({{"name", l.name},
                          {"polyline", pts},
                          {"direction", std::string(to_string(l.direction))},
                          {"rate_per_min", rates_json(l.rate_per_min)},
                          {"speed_px_s", l.speed_px_s}});
  }
  j["stalls"] = json::array();
  for (const auto& s : c.stalls) {
    j["stalls"].push_back({{"lane", s.lane},
                           {"start_s", s.start_s},
                           {"duration_s", s.duration_s},
                           {"cls", std::string(to_string(s.class_label))},
                           {"position", s.position}});
  }
  j["frozen_windows"] = json::array();
  for (const auto& w : c.frozen_windows) {
    j["frozen_windows"].push_back({{"start_s", w.start_s}, {"duration_s", w.duration_s}});
  }
  j["counting_lines"] = json::array();
  for (const auto& l : c.counting_lines) j["counting_lines"].push_back(codec::to_json(l));
  if (c.queue_profile) {
    const auto& q = *c.queue_profile;
    json peaks = json::array();
    for (const auto& p : q.peaks) {
      peaks.push_back({{"start_minute", p.start_minute},
                       {"end_minute", p.end_minute},
                       {"pixel_length", p.pixel_length},
                       {"days", p.days}});
    }
    j["queue_profile"] = {{"days", q.days},
                          {"first_day", q.first_day},
                          {"sample_period_s", q.sample_period_s},
                          {"base_pixel_length", q.base_pixel_length},
                          {"noise_sigma", q.noise_sigma},
                          {"peaks", peaks}};
  } else {
    j["queue_profile"] = nullptr;
  }
  const auto& n = c.noise;
  j["noise"] = {{"center_jitter_sigma_px", n.center_jitter_sigma_px},
                {"dropout_prob", n.dropout_prob},
                {"duplicate_prob", n.duplicate_prob},
                {"duplicate_iou_min", n.duplicate_iou_min},
                {"score_range", {n.score_min, n.score_max}}};
  j["embeddings"] = c.embeddings;
  j["embedding_dim"] = c.embedding_dim;
  j["max_spawn_delay_s"] = c.max_spawn_delay_s;
  return j.dump(2);
}

ScenarioConfig parse_scenario_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("scenario config: ") + e.what());
  }
  try {
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    ScenarioConfig c;
    if (auto it = j.find("preset"); it != j.end()) c = scenario_preset(it->get<std::string>(), seed);
    c.seed = seed;
    c.camera_id = j.value("camera_id", c.camera_id);
    c.duration_s = j.value("duration_s", c.duration_s);
    c.frame_rate_fps = j.value("frame_rate_fps", c.frame_rate_fps);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.start_ts_ms = j.value("start_ts_ms", c.start_ts_ms);
    if (auto it = j.find("lanes"); it != j.end()) {
      c.lanes.clear();
      for (const auto& lj : *it) {
        LaneSpec l;
        l.name = lj.value("name", std::string());
        for (const auto& p : codec::require(lj, "polyline")) {
          l.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        l.direction = parse_direction(codec::require(lj, "direction").get<std::string>());
        if (auto r = lj.find("rate_per_min"); r != lj.end()) {
          for (const auto& [k, v] : r->items()) l.rate_per_min[index_of(parse_class_label(k))] = v.get<double>();
        }
        l.speed_px_s = lj.value("speed_px_s", l.speed_px_s);
        c.lanes.push_back(std::move(l));
      }
    }
    if (auto it = j.find("stalls"); it != j.end()) {
      c.stalls.clear();
      for (const auto& sj : *it) {
        StallSpec s;
        s.lane = codec::require(sj, "lane").get<int>();
        s.start_s = codec::require(sj, "start_s").get<double>();
        s.duration_s = codec::require(sj, "duration_s").get<double>();
        s.class_label = parse_class_label(sj.value("cls", std::string("car")));
        s.position = sj.value("position", 0.5);
        c.stalls.push_back(s);
      }
    }
    if (auto it = j.find("frozen_windows"); it != j.end()) {
      c.frozen_windows.clear();
      for (const auto& wj : *it) {
        c.frozen_windows.push_back({codec::require(wj, "start_s").get<double>(),
                                    codec::require(wj, "duration_s").get<double>()});
      }
    }
    if (auto it = j.find("counting_lines"); it != j.end()) {
      c.counting_lines.clear();
      for (const auto& lj : *it) c.counting_lines.push_back(codec::counting_line_from_json(lj));
    }
    if (auto it = j.find("queue_profile"); it != j.end()) {
      if (it->is_null()) {
        c.queue_profile.reset();
      } else {
        QueueProfile q = c.queue_profile.value_or(QueueProfile{});
        q.days = it->value("days", q.days);
        q.first_day = it->value("first_day", q.first_day);
        q.sample_period_s = it->value("sample_period_s", q.sample_period_s);
        q.base_pixel_length = it->value("base_pixel_length", q.base_pixel_length);
        q.noise_sigma = it->value("noise_sigma", q.noise_sigma);
        if (auto p = it->find("peaks"); p != it->end()) {
          q.peaks.clear();
          for (const auto& pj : *p) {
            QueuePeak peak;
            peak.start_minute = codec::require(pj, "start_minute").get<int>();
            peak.end_minute = codec::require(pj, "end_minute").get<int>();
            peak.pixel_length = codec::require(pj, "pixel_length").get<double>();
            peak.days = pj.value("days", std::vector<int>{});
            q.peaks.push_back(std::move(peak));
          }
        }
        c.queue_profile = q;
      }
    }
    if (auto it = j.find("noise"); it != j.end()) {
      auto& n = c.noise;
      n.center_jitter_sigma_px = it->value("center_jitter_sigma_px", n.center_jitter_sigma_px);
      n.dropout_prob = it->value("dropout_prob", n.dropout_prob);
      n.duplicate_prob = it->value("duplicate_prob", n.duplicate_prob);
      n.duplicate_iou_min = it->value("duplicate_iou_min", n.duplicate_iou_min);
      if (auto r = it->find("score_range"); r != it->end()) {
        n.score_min = r->at(0).get<double>();
        n.score_max = r->at(1).get<double>();
      }
    }
    c.embeddings = j.value("embeddings", c.embeddings);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.max_spawn_delay_s = j.value("max_spawn_delay_s", c.max_spawn_delay_s);
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario config: ") + e.what());
  }
}

}  // namespace trafficmon
