#include "trafficmon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

void validate(const BinaryCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) {
    throw ValidationError("binary counts must be >= 0");
  }
  if (c.tp + c.fp + c.tn + c.fn == 0) throw ValidationError("binary counts are all zero");
}

namespace {

double ratio(std::int64_t num, std::int64_t den, const char* metric) {
  if (den == 0) throw UndefinedMetricError(metric);
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double precision(const BinaryCounts& c) { return ratio(c.tp, c.tp + c.fp, "precision"); }
double recall(const BinaryCounts& c) { return ratio(c.tp, c.tp + c.fn, "recall"); }
double accuracy_tp_only(const BinaryCounts& c) {
  return ratio(c.tp, c.tp + c.fp + c.tn + c.fn, "accuracy_tp_only");
}
double accuracy_standard(const BinaryCounts& c) {
  return ratio(c.tp + c.tn, c.tp + c.fp + c.tn + c.fn, "accuracy_standard");
}

double f1_score(double p, double r) {
  if (p + r == 0.0) throw UndefinedMetricError("f1");
  return 2.0 * p * r / (p + r);
}

ClassificationMetrics classification_metrics(const BinaryCounts& c) {
  validate(c);
  ClassificationMetrics m;
  m.precision = precision(c);
  m.recall = recall(c);
  m.accuracy_tp_only = accuracy_tp_only(c);
  m.accuracy_standard = accuracy_standard(c);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

// ---------------------------------------------------------------------------

ConfusionMatrix confusion_matrix(std::span<const std::pair<ClassLabel, ClassLabel>> pairs) {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};
  ConfusionMatrix m;
  for (const auto& [pred, truth] : pairs) {
    ++counts[index_of(pred)][index_of(truth)];
    ++m.row_support[index_of(pred)];
  }
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (m.row_support[r] == 0) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      m.cells[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(m.row_support[r]);
    }
  }
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const std::pair<std::string, std::string>> pairs) {
  std::vector<std::pair<ClassLabel, ClassLabel>> parsed;
  parsed.reserve(pairs.size());
  for (const auto& [p, t] : pairs) parsed.emplace_back(parse_class_label(p), parse_class_label(t));
  return confusion_matrix(parsed);
}

double max_row_sum_deviation(std::span<const std::array<double, kNumClasses>> rows) {
  double worst = 0.0;
  for (const auto& row : rows) {
    double sum = 0.0;
    for (double v : row) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

double max_row_sum_deviation(const ConfusionMatrix& m) {
  std::vector<std::array<double, kNumClasses>> rows;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (m.row_support[r] > 0) rows.push_back(m.cells[r]);
  }
  return max_row_sum_deviation(rows);
}

// ---------------------------------------------------------------------------

namespace {

struct FrameBox {
  std::int64_t track_id;
  const Detection* det;
};

std::unordered_map<std::int64_t, std::vector<FrameBox>> index_by_frame(
    std::span<const Track> tracks) {
  std::unordered_map<std::int64_t, std::vector<FrameBox>> out;
  for (const auto& t : tracks) {
    for (const auto& d : t.detections) out[d.frame_index].push_back({t.track_id, &d});
  }
  return out;
}

}  // namespace

std::int64_t count_switches(std::span<const Track> predicted, std::span<const Track> truth,
                            double min_iou) {
  const auto by_frame = index_by_frame(predicted);
  std::int64_t switches = 0;
  for (const auto& gt : truth) {
    std::optional<std::int64_t> previous;
    for (const auto& d : gt.detections) {
      const auto it = by_frame.find(d.frame_index);
      if (it == by_frame.end()) continue;
      std::optional<std::int64_t> best_id;
      double best_iou = 0.0;
      for (const auto& fb : it->second) {
        const double v = iou_unchecked(d.box, fb.det->box);
        if (v < min_iou) continue;
        if (!best_id || v > best_iou || (v == best_iou && fb.track_id < *best_id)) {
          best_id = fb.track_id;
          best_iou = v;
        }
      }
      if (!best_id) continue;
      if (previous && *previous != *best_id) ++switches;
      previous = best_id;
    }
  }
  return switches;
}

double switch_rate(std::span<const Track> predicted, std::span<const Track> truth,
                   double min_iou) {
  if (truth.empty()) throw UndefinedMetricError("switch_rate");
  return static_cast<double>(count_switches(predicted, truth, min_iou)) /
         static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------

AnomalyMatch match_anomalies(std::span<const AnomalyEvent> predicted,
                             std::span<const AnomalyEvent> truth, double window_s) {
  struct Candidate {
    std::int64_t delta_ms;
    std::size_t p, t;
  };
  const auto window_ms = static_cast<std::int64_t>(std::llround(window_s * 1000.0));
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (predicted[p].camera_id != truth[t].camera_id) continue;
      const auto delta = std::abs(predicted[p].start_ts_ms - truth[t].start_ts_ms);
      if (delta <= window_ms) candidates.push_back({delta, p, t});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.delta_ms, a.p, a.t) < std::tie(b.delta_ms, b.p, b.t);
  });
  std::vector<bool> p_used(predicted.size(), false), t_used(truth.size(), false);
  AnomalyMatch m;
  for (const auto& c : candidates) {
    if (p_used[c.p] || t_used[c.t]) continue;
    p_used[c.p] = t_used[c.t] = true;
    m.tp.emplace_back(c.p, c.t);
    m.time_errors_s.push_back(static_cast<double>(c.delta_ms) / 1000.0);
  }
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    if (!p_used[p]) m.fp.push_back(p);
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!t_used[t]) m.fn.push_back(t);
  }
  return m;
}

AnomalyScore s3_from_rmse(double f1, double rmse_s, double nrmse_min, double nrmse_max) {
  if (!(f1 >= 0.0 && f1 <= 1.0)) throw ValidationError("f1 must be in [0, 1]");
  if (!(nrmse_max > nrmse_min)) throw ValidationError("nrmse bounds must satisfy min < max");
  AnomalyScore s;
  s.f1 = f1;
  s.rmse_s = rmse_s;
  s.nrmse = (std::clamp(rmse_s, nrmse_min, nrmse_max) - nrmse_min) / (nrmse_max - nrmse_min);
  s.s3 = f1 * (1.0 - s.nrmse);
  return s;
}

AnomalyScore s3_score(double f1, std::span<const double> errors, double nrmse_min,
                      double nrmse_max) {
  double rmse = 0.0;
  if (!errors.empty()) {
    double acc = 0.0;
    for (double e : errors) acc += e * e;
    rmse = std::sqrt(acc / static_cast<double>(errors.size()));
  }
  return s3_from_rmse(f1, rmse, nrmse_min, nrmse_max);
}

// ---------------------------------------------------------------------------

std::int64_t DetectionHeatmap::at(Outcome o, int row, int col) const {
  const auto& grid = o == Outcome::kTruePositive ? tp : o == Outcome::kFalsePositive ? fp : fn;
  return grid.at(static_cast<std::size_t>(row) * cols + col);
}

DetectionHeatmap detection_heatmap(std::span<const OutcomePoint> outcomes, int rows, int cols,
                                   double width, double height) {
  if (rows <= 0 || cols <= 0) throw ValidationError("heatmap grid must be at least 1x1");
  if (!(width > 0.0 && height > 0.0)) throw ValidationError("image size must be positive");
  DetectionHeatmap map;
  map.rows = rows;
  map.cols = cols;
  const auto cells = static_cast<std::size_t>(rows) * cols;
  map.tp.assign(cells, 0);
  map.fp.assign(cells, 0);
  map.fn.assign(cells, 0);
  for (const auto& o : outcomes) {
    const auto& c = o.center;
    if (!(c.x >= 0.0 && c.x <= width && c.y >= 0.0 && c.y <= height)) {
      throw ValidationError("outcome center outside the image");
    }
    const int col = std::min(cols - 1, static_cast<int>(std::floor(c.x * cols / width)));
    const int row = std::min(rows - 1, static_cast<int>(std::floor(c.y * rows / height)));
    auto& grid = o.outcome == Outcome::kTruePositive    ? map.tp
                 : o.outcome == Outcome::kFalsePositive ? map.fp
                                                        : map.fn;
    ++grid[static_cast<std::size_t>(row) * cols + col];
  }
  return map;
}

DetectionMatch match_detections(std::span<const Track> predicted, std::span<const Track> truth,
                                double min_iou) {
  const auto pred_by_frame = index_by_frame(predicted);
  const auto truth_by_frame = index_by_frame(truth);
  std::vector<std::int64_t> frames;
  for (const auto& [f, _] : pred_by_frame) frames.push_back(f);
  for (const auto& [f, _] : truth_by_frame) {
    if (!pred_by_frame.contains(f)) frames.push_back(f);
  }
  std::sort(frames.begin(), frames.end());

  DetectionMatch out;
  static const std::vector<FrameBox> kNone;
  for (const auto f : frames) {
    const auto pit = pred_by_frame.find(f);
    const auto tit = truth_by_frame.find(f);
    const auto& preds = pit == pred_by_frame.end() ? kNone : pit->second;
    const auto& truths = tit == truth_by_frame.end() ? kNone : tit->second;
    struct Pair {
      double iou;
      std::size_t p, t;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      for (std::size_t t = 0; t < truths.size(); ++t) {
        const double v = iou_unchecked(preds[p].det->box, truths[t].det->box);
        if (v >= min_iou) pairs.push_back({v, p, t});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      return std::tie(a.p, a.t) < std::tie(b.p, b.t);
    });
    std::vector<bool> p_used(preds.size(), false), t_used(truths.size(), false);
    for (const auto& pr : pairs) {
      if (p_used[pr.p] || t_used[pr.t]) continue;
      p_used[pr.p] = t_used[pr.t] = true;
      const auto pc = preds[pr.p].det->class_label;
      const auto tc = truths[pr.t].det->class_label;
      out.class_pairs.emplace_back(pc, tc);
      if (pc == tc) {
        ++out.per_class[index_of(pc)].tp;
      } else {
        ++out.per_class[index_of(pc)].fp;
        ++out.per_class[index_of(tc)].fn;
      }
      out.outcomes.push_back({Outcome::kTruePositive, truths[pr.t].det->box.center()});
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (p_used[p]) continue;
      ++out.per_class[index_of(preds[p].det->class_label)].fp;
      out.outcomes.push_back({Outcome::kFalsePositive, preds[p].det->box.center()});
    }
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (t_used[t]) continue;
      ++out.per_class[index_of(truths[t].det->class_label)].fn;
      out.outcomes.push_back({Outcome::kFalseNegative, truths[t].det->box.center()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// 2TP / (2TP + FP + FN), the count form of the harmonic mean; nullopt when
// nothing was predicted or expected.
std::optional<double> f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  const auto den = 2 * tp + fp + fn;
  if (den == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

}  // namespace

EvalReport evaluate(const EvalInputs& in) {
  EvalReport report;
  if (!in.truth) return report;
  const auto& truth = *in.truth;

  if (!truth.tracks.empty()) {
    const auto match = match_detections(in.predicted_tracks, truth.tracks, in.match_iou);
    if (!match.class_pairs.empty()) report.confusion = confusion_matrix(match.class_pairs);
    for (const auto cls : kAllClasses) {
      const auto& c = match.per_class[index_of(cls)];
      report.per_class_f1[cls] = f1_from_counts(c.tp, c.fp, c.fn);
    }
    report.switch_rate = switch_rate(in.predicted_tracks, truth.tracks, in.match_iou);
  }

  if (in.predicted_anomalies) {
    std::vector<AnomalyEvent> confirmed;
    for (const auto& e : *in.predicted_anomalies) {
      if (e.status == AnomalyStatus::kConfirmed) confirmed.push_back(e);
    }
    const auto m = match_anomalies(confirmed, truth.anomalies, in.anomaly_window_s);
    EvalReport::Anomaly a;
    a.tp = static_cast<std::int64_t>(m.tp.size());
    a.fp = static_cast<std::int64_t>(m.fp.size());
    a.fn = static_cast<std::int64_t>(m.fn.size());
    a.f1 = f1_from_counts(a.tp, a.fp, a.fn);
    if (a.f1) a.score = s3_score(*a.f1, m.time_errors_s, in.nrmse_min, in.nrmse_max);
    report.anomaly = a;
  }

  if (in.predicted_counts) {
    std::map<std::string, std::int64_t> detected;
    for (const auto& row : *in.predicted_counts) detected[row.line] += row.count;
    std::map<std::string, std::int64_t> expected;
    for (const auto& c : truth.counts) expected[c.line] += c.count;
    for (const auto& [line, gt] : expected) {
      const auto it = detected.find(line);
      const std::int64_t got = it == detected.end() ? 0 : it->second;
      report.count_percentage[line] =
          gt == 0 ? std::nullopt : std::optional<double>(count_percentage(got, gt));
    }
  }
  return report;
}

std::string eval_report_json(const EvalReport& r) {
  using codec::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  json j;
  if (r.confusion) {
    json classes = json::array();
    for (const auto cls : kAllClasses) classes.push_back(std::string(to_string(cls)));
    json rows = json::array();
    for (const auto& row : r.confusion->cells) rows.push_back(json(row));
    j["confusion"] = json{{"classes", classes},
                          {"rows", rows},
                          {"row_support", json(r.confusion->row_support)}};
  } else {
    j["confusion"] = nullptr;
  }
  j["per_class_f1"] = json::object();
  for (const auto& [cls, v] : r.per_class_f1) j["per_class_f1"][std::string(to_string(cls))] = opt(v);
  j["switch_rate"] = opt(r.switch_rate);
  if (r.anomaly) {
    const auto& a = *r.anomaly;
    json aj{{"tp", a.tp}, {"fp", a.fp}, {"fn", a.fn}, {"f1", opt(a.f1)}};
    if (a.score) {
      aj["rmse"] = a.score->rmse_s;
      aj["nrmse"] = a.score->nrmse;
      aj["s3"] = a.score->s3;
    } else {
      aj["rmse"] = aj["nrmse"] = aj["s3"] = nullptr;
    }
    j["anomaly"] = aj;
  } else {
    j["anomaly"] = nullptr;
  }
  j["counts"] = json::object();
  for (const auto& [line, v] : r.count_percentage) j["counts"][line] = opt(v);
  return j.dump(2);
}

}  // namespace trafficmon
