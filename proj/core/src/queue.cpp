#include "trafficmon/queue.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/ingest.hpp"

namespace trafficmon {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double dist2(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double point_set_diameter(std::span<const Point> points) {
  if (points.empty()) return 0.0;
  const auto hull = convex_hull({points.begin(), points.end()});
  const std::size_t n = hull.size();
  if (n == 1) return 0.0;
  if (n == 2) return std::sqrt(dist2(hull[0], hull[1]));
  double best = 0.0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ni = (i + 1) % n;
    while (std::abs(cross(hull[i], hull[ni], hull[(j + 1) % n])) >
           std::abs(cross(hull[i], hull[ni], hull[j]))) {
      j = (j + 1) % n;
    }
    best = std::max({best, dist2(hull[i], hull[j]), dist2(hull[ni], hull[j])});
  }
  return std::sqrt(best);
}

double mask_pixel_length(const BitMask& mask) {
  if (mask.empty()) throw EmptyMaskError("mask has no set pixels");
  // The hull of each row's extreme pixels equals the hull of all pixels.
  std::vector<Point> extremes;
  for (std::int32_t y = 0; y < mask.height(); ++y) {
    std::int32_t lo = -1, hi = -1;
    for (std::int32_t x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) {
        if (lo < 0) lo = x;
        hi = x;
      }
    }
    if (lo < 0) continue;
    extremes.push_back({static_cast<double>(lo), static_cast<double>(y)});
    if (hi != lo) extremes.push_back({static_cast<double>(hi), static_cast<double>(y)});
  }
  return point_set_diameter(extremes);
}

double quantile_sorted(std::span<const double> values, double p) {
  if (values.empty()) throw InsufficientDataError("quantile of empty set");
  const double pos = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::int64_t day_index(std::int64_t ts) {
  return ts >= 0 ? ts / kMsPerDay : -((-ts + kMsPerDay - 1) / kMsPerDay);
}

int time_of_day_bin(std::int64_t ts, int bin_minutes) {
  const std::int64_t in_day = ts - day_index(ts) * kMsPerDay;
  return static_cast<int>(in_day / kMsPerMinute / bin_minutes);
}

std::string day_string(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<BinQuartiles> bin_quartiles(std::span<const QueueSample> history, int bin_minutes) {
  if (bin_minutes <= 0 || 1440 % bin_minutes != 0) {
    throw ValidationError("bin_minutes must divide a day");
  }
  std::map<int, std::vector<double>> bins;
  for (const auto& s : history) bins[time_of_day_bin(s.timestamp_ms, bin_minutes)].push_back(s.pixel_length);
  std::vector<BinQuartiles> out;
  out.reserve(bins.size());
  for (auto& [bin, values] : bins) {
    std::sort(values.begin(), values.end());
    out.push_back({bin, quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
                   quantile_sorted(values, 0.75)});
  }
  return out;
}

namespace {

double population_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

SeverityThresholds compute_thresholds(std::span<const QueueSample> history,
                                      const ThresholdConfig& cfg) {
  std::set<std::int64_t> days;
  for (const auto& s : history) {
    if (!(s.pixel_length >= 0.0) || !std::isfinite(s.pixel_length)) {
      throw ValidationError("pixel_length must be finite and >= 0");
    }
    days.insert(day_index(s.timestamp_ms));
  }
  if (history.empty() || static_cast<int>(days.size()) < cfg.min_history_days) {
    throw InsufficientDataError("queue history covers " + std::to_string(days.size()) +
                                " day(s), need " + std::to_string(cfg.min_history_days));
  }
  const auto quartiles = bin_quartiles(history, cfg.bin_minutes);
  std::vector<double> q1, q2, q3;
  double base = -std::numeric_limits<double>::infinity();
  for (const auto& b : quartiles) {
    q1.push_back(b.q1);
    q2.push_back(b.q2);
    q3.push_back(b.q3);
    base = std::max(base, (b.q1 + b.q2 + b.q3) / 3.0);
  }
  return {base + cfg.k * population_std(q1), base + cfg.k * population_std(q2),
          base + cfg.k * population_std(q3), cfg.k};
}

SeverityLevel classify_severity(double length, const SeverityThresholds& th) {
  std::array<double, 3> t{th.low, th.medium, th.high};
  std::sort(t.begin(), t.end());
  if (length <= t[0]) return SeverityLevel::kLow;
  if (length <= t[1]) return SeverityLevel::kMedium;
  return SeverityLevel::kHigh;
}

SeverityHeatmap severity_heatmap(std::span<const QueueSample> samples,
                                 const SeverityThresholds& th, std::int64_t first_day,
                                 int num_days, int bin_minutes) {
  if (bin_minutes <= 0 || 1440 % bin_minutes != 0) {
    throw ValidationError("bin_minutes must divide a day");
  }
  if (num_days < 0) throw ValidationError("negative day count");
  const int bins = 1440 / bin_minutes;
  std::vector<std::vector<double>> sum(num_days, std::vector<double>(bins, 0.0));
  std::vector<std::vector<int>> n(num_days, std::vector<int>(bins, 0));
  for (const auto& s : samples) {
    const std::int64_t row = day_index(s.timestamp_ms) - first_day;
    if (row < 0 || row >= num_days) continue;
    const int col = time_of_day_bin(s.timestamp_ms, bin_minutes);
    sum[row][col] += s.pixel_length;
    ++n[row][col];
  }
  SeverityHeatmap map;
  map.first_day = first_day;
  map.bin_minutes = bin_minutes;
  map.mean_length.assign(num_days, std::vector<std::optional<double>>(bins));
  map.cells.assign(num_days, std::vector<std::optional<SeverityLevel>>(bins));
  for (int r = 0; r < num_days; ++r) {
    for (int c = 0; c < bins; ++c) {
      if (n[r][c] == 0) continue;
      const double mean = sum[r][c] / n[r][c];
      map.mean_length[r][c] = mean;
      map.cells[r][c] = classify_severity(mean, th);
    }
  }
  return map;
}

namespace {

std::string bin_label(int bin, int bin_minutes) {
  const int minute = bin * bin_minutes;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

}  // namespace

std::string heatmap_csv(const SeverityHeatmap& map) {
  const int bins = 1440 / map.bin_minutes;
  std::string out = "date";
  for (int b = 0; b < bins; ++b) {
    out += ',';
    out += bin_label(b, map.bin_minutes);
  }
  out += '\n';
  for (std::size_t r = 0; r < map.cells.size(); ++r) {
    out += day_string(map.first_day + static_cast<std::int64_t>(r));
    for (const auto& cell : map.cells[r]) {
      out += ',';
      out += cell ? severity_code(*cell) : '-';
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_json(const SeverityHeatmap& map) {
  using codec::json;
  const int bins = 1440 / map.bin_minutes;
  json j;
  j["dates"] = json::array();
  for (std::size_t r = 0; r < map.cells.size(); ++r) {
    j["dates"].push_back(day_string(map.first_day + static_cast<std::int64_t>(r)));
  }
  j["bins"] = json::array();
  for (int b = 0; b < bins; ++b) j["bins"].push_back(bin_label(b, map.bin_minutes));
  j["cells"] = json::array();
  j["mean_length"] = json::array();
  for (std::size_t r = 0; r < map.cells.size(); ++r) {
    json cells = json::array(), means = json::array();
    for (std::size_t c = 0; c < map.cells[r].size(); ++c) {
      const auto& cell = map.cells[r][c];
      cells.push_back(cell ? std::string(1, severity_code(*cell)) : std::string("-"));
      means.push_back(map.mean_length[r][c] ? json(*map.mean_length[r][c]) : json());
    }
    j["cells"].push_back(std::move(cells));
    j["mean_length"].push_back(std::move(means));
  }
  return j.dump();
}

std::string thresholds_json(const SeverityThresholds& th) {
  return codec::json{{"L", th.low}, {"M", th.medium}, {"H", th.high}, {"k", th.k}}.dump();
}

SeverityThresholds parse_thresholds_json(std::string_view text) {
  try {
    const auto j = codec::json::parse(text);
    return {codec::require(j, "L").get<double>(), codec::require(j, "M").get<double>(),
            codec::require(j, "H").get<double>(), j.value("k", 1.0)};
  } catch (const codec::json::exception& e) {
    throw ParseError(0, std::string("thresholds: ") + e.what());
  }
}

std::vector<QueueSample> parse_queue_samples(std::string_view text) {
  std::vector<QueueSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = codec::json::parse(line);
      QueueSample s;
      s.camera_id = codec::require(j, "cam").get<std::string>();
      s.timestamp_ms = codec::require(j, "ts_ms").get<std::int64_t>();
      if (auto it = j.find("mask_id"); it != j.end() && !it->is_null()) {
        s.mask_id = it->get<std::string>();
      }
      if (auto it = j.find("pl"); it != j.end() && !it->is_null()) {
        s.pixel_length = it->get<double>();
      } else {
        const auto& size = codec::require(j, "size");
        const auto mask = decode_mask(codec::mask_from_json(codec::require(j, "mask")),
                                      size.at(0).get<std::int32_t>(),
                                      size.at(1).get<std::int32_t>());
        s.pixel_length = mask_pixel_length(mask);
      }
      if (!(s.pixel_length >= 0.0)) throw ValidationError("pl must be >= 0");
      out.push_back(std::move(s));
    } catch (const codec::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::string format_queue_sample(const QueueSample& s) {
  codec::json j{{"cam", s.camera_id}, {"ts_ms", s.timestamp_ms}, {"pl", s.pixel_length}};
  if (s.mask_id) j["mask_id"] = *s.mask_id;
  return j.dump();
}

}  // namespace trafficmon
