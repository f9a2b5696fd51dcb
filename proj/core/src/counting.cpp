#include "trafficmon/counting.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "trafficmon/errors.hpp"

namespace trafficmon {

FrameDetections dedup_detections(const FrameDetections& frame, double iou_threshold) {
  const auto& dets = frame.detections;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> keep(dets.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].class_label == dets[i].class_label &&
             iou_unchecked(dets[k].box, dets[i].box) > iou_threshold;
    });
    if (!suppressed) {
      keep[i] = true;
      kept.push_back(i);
    }
  }
  FrameDetections out;
  out.camera_id = frame.camera_id;
  out.frame_index = frame.frame_index;
  out.timestamp_ms = frame.timestamp_ms;
  out.frame_digest = frame.frame_digest;
  out.detections.reserve(kept.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.detections.push_back(dets[i]);
  }
  return out;
}

char sign_char(CrossingSign sign) { return sign == CrossingSign::kPositive ? '+' : '-'; }

std::int64_t CountTally::count(const std::string& line, ClassLabel cls, CrossingSign sign) const {
  auto it = totals_.find(CountKey{line, cls, sign});
  return it == totals_.end() ? 0 : it->second;
}

std::int64_t CountTally::line_total(const std::string& line) const {
  std::int64_t n = 0;
  for (const auto& [k, v] : totals_) {
    if (k.line == line) n += v;
  }
  return n;
}

std::int64_t CountTally::line_total(const std::string& line, CrossingSign sign) const {
  std::int64_t n = 0;
  for (const auto& [k, v] : totals_) {
    if (k.line == line && k.sign == sign) n += v;
  }
  return n;
}

bool CountTally::counted(const std::string& line, std::int64_t track_id) const {
  auto it = counted_.find(line);
  return it != counted_.end() && it->second.contains(track_id);
}

void CountTally::add(const CountKey& key, std::int64_t track_id, std::int64_t timestamp_ms) {
  if (!counted_[key.line].insert(track_id).second) return;
  ++totals_[key];
  records_.push_back({key, track_id, timestamp_ms});
}

namespace {

int side_of(Point p, const CountingLine& line) {
  const double v = (line.p2.x - line.p1.x) * (p.y - line.p1.y) -
                   (line.p2.y - line.p1.y) * (p.x - line.p1.x);
  return (v > 0) - (v < 0);
}

int orient(Point o, Point a, Point b) {
  const double v = (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  return (v > 0) - (v < 0);
}

bool within_box(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 * o2 <= 0 && o3 * o4 <= 0) return true;
  return (o1 == 0 && within_box(a, b, c)) || (o2 == 0 && within_box(a, b, d)) ||
         (o3 == 0 && within_box(c, d, a)) || (o4 == 0 && within_box(c, d, b));
}

}  // namespace

std::optional<CrossingSign> segment_crossing(Point a, Point b, const CountingLine& line) {
  const Point d = unit_vector(line.positive_dir);
  const double pv = (line.p2.x - line.p1.x) * d.y - (line.p2.y - line.p1.y) * d.x;
  const int positive_side = (pv > 0) - (pv < 0);
  // Points on the line belong to the positive side, so touching and leaving
  // again never yields a pair of crossings.
  auto side = [&](Point p) {
    const int s = side_of(p, line);
    return s == 0 ? positive_side : s;
  };
  const int sa = side(a);
  const int sb = side(b);
  if (sa == sb) return std::nullopt;
  if (!segments_touch(a, b, line.p1, line.p2)) return std::nullopt;
  return sb == positive_side ? CrossingSign::kPositive : CrossingSign::kNegative;
}

LineCounter::LineCounter(std::vector<CountingLine> lines) : lines_(std::move(lines)) {
  for (const auto& l : lines_) validate(l);
}

void LineCounter::scan(std::int64_t track_id, Pending& p, std::vector<CountRecord>& out) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (p.votes[c] > p.votes[best]) best = c;
  }
  const ClassLabel cls = kAllClasses[best];
  for (std::size_t i = std::max<std::size_t>(p.processed, 1); i < p.centroids.size(); ++i) {
    for (const auto& line : lines_) {
      if (tally_.counted(line.label, track_id)) continue;
      if (auto sign = segment_crossing(p.centroids[i - 1].second, p.centroids[i].second, line)) {
        const CountKey key{line.label, cls, *sign};
        tally_.add(key, track_id, p.centroids[i].first);
        out.push_back(tally_.records().back());
      }
    }
  }
  // Only the newest centroid is needed for the next segment.
  p.centroids.erase(p.centroids.begin(), p.centroids.end() - 1);
  p.processed = 1;
}

std::vector<CountRecord> LineCounter::step(const StepResult& events) {
  std::vector<CountRecord> out;
  for (const auto& ev : events.events) {
    if (ev.kind != TrackEvent::Kind::kUpdated) {
      tracks_.erase(ev.track_id);
      continue;
    }
    Pending& p = tracks_[ev.track_id];
    p.centroids.emplace_back(ev.detection->timestamp_ms, ev.detection->box.center());
    ++p.votes[index_of(ev.detection->class_label)];
    if (ev.state == TrackState::kActive) p.active = true;
    if (p.active) scan(ev.track_id, p, out);
  }
  return out;
}

CountTally count_tracks(std::span<const Track> tracks, std::span<const CountingLine> lines) {
  CountTally tally;
  for (const auto& t : tracks) {
    const ClassLabel cls = t.majority_class();
    for (std::size_t i = 1; i < t.detections.size(); ++i) {
      for (const auto& line : lines) {
        if (tally.counted(line.label, t.track_id)) continue;
        if (auto sign = segment_crossing(t.detections[i - 1].box.center(),
                                         t.detections[i].box.center(), line)) {
          tally.add({line.label, cls, *sign}, t.track_id, t.detections[i].timestamp_ms);
        }
      }
    }
  }
  return tally;
}

double count_percentage(std::int64_t detected, std::int64_t ground_truth) {
  if (ground_truth == 0) throw UndefinedMetricError("count_percentage");
  return 100.0 * static_cast<double>(detected) / static_cast<double>(ground_truth);
}

std::string format_count_csv(const CountTally& tally, std::int64_t window_ms) {
  if (window_ms <= 0) throw ValidationError("count window must be positive");
  std::map<std::tuple<std::string, ClassLabel, CrossingSign, std::int64_t>, std::int64_t> rows;
  for (const auto& r : tally.records()) {
    std::int64_t w = r.timestamp_ms / window_ms * window_ms;
    if (r.timestamp_ms < 0 && r.timestamp_ms % window_ms != 0) w -= window_ms;
    ++rows[{r.key.line, r.key.class_label, r.key.sign, w}];
  }
  std::ostringstream out;
  out << "line,class,direction,window_start,count\n";
  for (const auto& [k, n] : rows) {
    out << std::get<0>(k) << ',' << to_string(std::get<1>(k)) << ',' << sign_char(std::get<2>(k))
        << ',' << std::get<3>(k) << ',' << n << '\n';
  }
  return out.str();
}

std::vector<CountCsvRow> parse_count_csv(std::string_view text) {
  std::vector<CountCsvRow> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("line,", 0) == 0)) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ParseError(line_no, "expected 5 columns");
    try {
      CountCsvRow row;
      row.line = cells[0];
      row.class_label = parse_class_label(cells[1]);
      if (cells[2] == "+") {
        row.sign = CrossingSign::kPositive;
      } else if (cells[2] == "-") {
        row.sign = CrossingSign::kNegative;
      } else {
        throw ParseError(line_no, "direction must be + or -");
      }
      row.window_start_ms = std::stoll(cells[3]);
      row.count = std::stoll(cells[4]);
      out.push_back(std::move(row));
    } catch (const std::invalid_argument&) {
      throw ParseError(line_no, "bad number");
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace trafficmon
