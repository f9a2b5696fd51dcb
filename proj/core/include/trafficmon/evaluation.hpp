#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trafficmon/anomaly.hpp"
#include "trafficmon/formats.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon {

struct BinaryCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
};

// Throws ValidationError on negative counts or when every count is zero.
void validate(const BinaryCounts& c);

// Each throws UndefinedMetricError naming the metric on a zero denominator.
double precision(const BinaryCounts& c);
double recall(const BinaryCounts& c);
// TP / (TP + FP + TN + FN): the variant with TN left out of the numerator.
double accuracy_tp_only(const BinaryCounts& c);
// (TP + TN) / (TP + FP + TN + FN)
double accuracy_standard(const BinaryCounts& c);
// Harmonic mean of precision and recall.
double f1_score(double precision, double recall);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy_tp_only = 0.0;
  double accuracy_standard = 0.0;
  double f1 = 0.0;
};

ClassificationMetrics classification_metrics(const BinaryCounts& c);

// Rows are predicted classes, columns true classes, both in kAllClasses
// order. Rows are normalized by their pair count; a class that was never
// predicted keeps an all-zero row and row_support 0.
struct ConfusionMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> cells{};
  std::array<std::int64_t, kNumClasses> row_support{};

  double at(ClassLabel predicted, ClassLabel truth) const {
    return cells[index_of(predicted)][index_of(truth)];
  }
};

ConfusionMatrix confusion_matrix(std::span<const std::pair<ClassLabel, ClassLabel>> pairs);
// Same over textual labels; unknown labels throw ValidationError.
ConfusionMatrix confusion_matrix(
    std::span<const std::pair<std::string, std::string>> pairs);

// Largest |row sum - 1| over rows that have support (or over every row when
// `rows` is given explicitly).
double max_row_sum_deviation(const ConfusionMatrix& m);
double max_row_sum_deviation(std::span<const std::array<double, kNumClasses>> rows);

// Per frame, each ground-truth vehicle is matched to the predicted track
// whose box has the highest IOU (at least min_iou; ties to the lower id). A
// switch is a matched id that differs from that vehicle's previous matched
// id. Returns switches / number of ground-truth vehicles; throws
// UndefinedMetricError on empty ground truth.
double switch_rate(std::span<const Track> predicted, std::span<const Track> truth,
                   double min_iou = 0.5);
std::int64_t count_switches(std::span<const Track> predicted, std::span<const Track> truth,
                            double min_iou = 0.5);

struct AnomalyMatch {
  std::vector<std::pair<std::size_t, std::size_t>> tp;  // (prediction, truth)
  std::vector<std::size_t> fp;
  std::vector<std::size_t> fn;
  std::vector<double> time_errors_s;  // per tp pair, |start delta| in seconds
};

// Greedy one-to-one matching by ascending |start delta| (ties by prediction
// then truth index); pairs within window_s are true positives. Events only
// match within the same camera.
AnomalyMatch match_anomalies(std::span<const AnomalyEvent> predicted,
                             std::span<const AnomalyEvent> truth, double window_s = 10.0);

struct AnomalyScore {
  double f1 = 0.0;
  double rmse_s = 0.0;
  double nrmse = 0.0;
  double s3 = 0.0;
};

// rmse over the errors (0 when empty), clamped into [nrmse_min, nrmse_max]
// and min-max normalized; s3 = f1 * (1 - nrmse).
AnomalyScore s3_score(double f1, std::span<const double> time_errors_s, double nrmse_min = 0.0,
                      double nrmse_max = 300.0);
AnomalyScore s3_from_rmse(double f1, double rmse_s, double nrmse_min = 0.0,
                          double nrmse_max = 300.0);

enum class Outcome : std::uint8_t { kTruePositive, kFalsePositive, kFalseNegative };

struct OutcomePoint {
  Outcome outcome = Outcome::kTruePositive;
  Point center;
};

struct DetectionHeatmap {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> tp;  // row-major rows x cols
  std::vector<std::int64_t> fp;
  std::vector<std::int64_t> fn;

  std::int64_t at(Outcome o, int row, int col) const;
};

// Cell of a center is floor(c * cells / size), with the far edge folded into
// the last cell. Centers outside [0, width] x [0, height] throw
// ValidationError.
DetectionHeatmap detection_heatmap(std::span<const OutcomePoint> outcomes, int rows, int cols,
                                   double width, double height);

// Class-agnostic greedy IOU matching within each frame (pairs visited by
// descending IOU); produces per-pair class labels and spatial outcomes.
struct DetectionMatch {
  std::vector<std::pair<ClassLabel, ClassLabel>> class_pairs;  // (predicted, truth)
  std::array<BinaryCounts, kNumClasses> per_class{};
  std::vector<OutcomePoint> outcomes;
};

DetectionMatch match_detections(std::span<const Track> predicted, std::span<const Track> truth,
                                double min_iou = 0.5);

struct EvalInputs {
  std::vector<Track> predicted_tracks;
  std::optional<GroundTruth> truth;
  std::optional<std::vector<AnomalyEvent>> predicted_anomalies;
  std::optional<std::vector<CountCsvRow>> predicted_counts;
  double match_iou = 0.5;
  double anomaly_window_s = 10.0;
  double nrmse_min = 0.0;
  double nrmse_max = 300.0;
};

struct EvalReport {
  std::optional<ConfusionMatrix> confusion;
  std::map<ClassLabel, std::optional<double>> per_class_f1;
  std::optional<double> switch_rate;
  struct Anomaly {
    std::int64_t tp = 0, fp = 0, fn = 0;
    std::optional<double> f1;
    std::optional<AnomalyScore> score;
  };
  std::optional<Anomaly> anomaly;
  std::map<std::string, std::optional<double>> count_percentage;
};

EvalReport evaluate(const EvalInputs& inputs);
// {"confusion", "per_class_f1", "switch_rate", "anomaly": {...}, "counts": {...}}
std::string eval_report_json(const EvalReport& report);

}  // namespace trafficmon
