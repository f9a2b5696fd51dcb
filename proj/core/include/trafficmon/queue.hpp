#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trafficmon/geometry.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

inline constexpr std::int64_t kMsPerMinute = 60'000;
inline constexpr std::int64_t kMsPerDay = 86'400'000;

struct QueueSample {
  std::string camera_id;
  std::int64_t timestamp_ms = 0;
  double pixel_length = 0.0;
  std::optional<std::string> mask_id;

  friend bool operator==(const QueueSample&, const QueueSample&) = default;
};

struct SeverityThresholds {
  double low = 0.0;
  double medium = 0.0;
  double high = 0.0;
  double k = 1.0;

  friend bool operator==(const SeverityThresholds&, const SeverityThresholds&) = default;
};

struct ThresholdConfig {
  double k = 1.0;
  int min_history_days = 7;
  int bin_minutes = 1;
};

// Convex hull (counter-clockwise, collinear points removed).
std::vector<Point> convex_hull(std::vector<Point> points);

// Largest pairwise distance, via rotating calipers over the hull.
double point_set_diameter(std::span<const Point> points);

// Diameter of the set-pixel centers. Throws EmptyMaskError on an empty mask.
double mask_pixel_length(const BitMask& mask);

// Linear interpolation between order statistics, position (n - 1) * p.
// `values` must be sorted ascending and non-empty.
double quantile_sorted(std::span<const double> values, double p);

struct BinQuartiles {
  int bin = 0;
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

int time_of_day_bin(std::int64_t timestamp_ms, int bin_minutes);
std::int64_t day_index(std::int64_t timestamp_ms);
// "YYYY-MM-DD" for a day index (days since 1970-01-01, UTC).
std::string day_string(std::int64_t day);

// Quartiles of pixel length per time-of-day bin, pooled across days. Only
// bins with samples appear, in ascending bin order.
std::vector<BinQuartiles> bin_quartiles(std::span<const QueueSample> history, int bin_minutes);

// Adaptive thresholds: base = max over bins of mean(Q1, Q2, Q3); then
// L/M/H = base + k * (population std across bins of the Q1/Q2/Q3 series).
// Throws InsufficientDataError when the history covers fewer than
// min_history_days distinct days.
SeverityThresholds compute_thresholds(std::span<const QueueSample> history,
                                      const ThresholdConfig& cfg);

// Bins against the two smallest of the (sorted) thresholds.
SeverityLevel classify_severity(double length, const SeverityThresholds& th);

struct SeverityHeatmap {
  std::int64_t first_day = 0;
  int bin_minutes = 1;
  // rows = days, cols = time-of-day bins
  std::vector<std::vector<std::optional<double>>> mean_length;
  std::vector<std::vector<std::optional<SeverityLevel>>> cells;

  std::size_t days() const { return cells.size(); }
  std::size_t bins() const { return cells.empty() ? 0 : cells.front().size(); }
};

SeverityHeatmap severity_heatmap(std::span<const QueueSample> samples,
                                 const SeverityThresholds& th, std::int64_t first_day,
                                 int num_days, int bin_minutes = 1);

// CSV: header "date,00:00,00:01,...", one row per day, cells L/M/H or '-'.
std::string heatmap_csv(const SeverityHeatmap& map);
// JSON: {"dates": [...], "bins": [...], "cells": [[...]], "mean_length": [[...]]}.
std::string heatmap_json(const SeverityHeatmap& map);

std::string thresholds_json(const SeverityThresholds& th);
SeverityThresholds parse_thresholds_json(std::string_view text);

// Queue sample lines: {"cam", "ts_ms", "pl"} or {"cam", "ts_ms", "mask":
// {"poly"|"rle"}, "size": [w, h], "mask_id"?}; mask lines are measured with
// mask_pixel_length.
std::vector<QueueSample> parse_queue_samples(std::string_view text);
std::string format_queue_sample(const QueueSample& sample);

}  // namespace trafficmon
