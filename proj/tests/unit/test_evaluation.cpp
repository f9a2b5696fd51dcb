#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "builders.hpp"
#include "published_results.hpp"
#include "scenes.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/evaluation.hpp"
#include "trafficmon/simulator.hpp"

namespace tmon = trafficmon;
using tmon::ClassLabel;
using tmon::testing::box;
using tmon::testing::det;

namespace {

tmon::AnomalyEvent at_s(double start_s, const std::string& cam = "c") {
  tmon::AnomalyEvent e;
  e.camera_id = cam;
  e.start_ts_ms = static_cast<std::int64_t>(start_s * 1000);
  e.status = tmon::AnomalyStatus::kConfirmed;
  return e;
}

}  // namespace

TEST(ClassificationMetrics, PublishedPrecisionRecallReproduceF1) {
  for (const auto& row : tmon::testing::kPrfRows) {
    EXPECT_NEAR(tmon::f1_score(row.precision, row.recall), row.f1, 1e-6)
        << row.model << " " << row.row;
  }
}

TEST(ClassificationMetrics, PerfectSingleCount) {
  const auto m = tmon::classification_metrics({1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);
}

TEST(ClassificationMetrics, TwoAccuracyVariants) {
  const auto m = tmon::classification_metrics({450, 50, 460, 40});
  EXPECT_DOUBLE_EQ(m.accuracy_standard, 0.91);
  EXPECT_DOUBLE_EQ(m.accuracy_tp_only, 0.45);
  EXPECT_DOUBLE_EQ(m.precision, 0.9);
  EXPECT_NEAR(m.recall, 450.0 / 490.0, 1e-15);
}

TEST(ClassificationMetrics, ZeroDenominatorNamesTheMetric) {
  try {
    tmon::precision({0, 0, 5, 3});
    FAIL();
  } catch (const tmon::UndefinedMetricError& e) {
    EXPECT_EQ(e.metric(), "precision");
  }
  EXPECT_THROW(tmon::recall({0, 4, 5, 0}), tmon::UndefinedMetricError);
  EXPECT_THROW(tmon::f1_score(0.0, 0.0), tmon::UndefinedMetricError);
  EXPECT_THROW(tmon::validate(tmon::BinaryCounts{}), tmon::ValidationError);
  EXPECT_THROW(tmon::validate(tmon::BinaryCounts{1, -1, 0, 0}), tmon::ValidationError);
}

TEST(ClassificationMetricsProperty, F1BetweenPrecisionAndRecall) {
  tmon::testing::TestRng rng(71);
  for (int i = 0; i < 2000; ++i) {
    const tmon::BinaryCounts c{rng.integer(1, 500), rng.integer(0, 500), rng.integer(0, 500),
                               rng.integer(0, 500)};
    const auto m = tmon::classification_metrics(c);
    EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-12);
    EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-12);
    EXPECT_LE(m.accuracy_tp_only, m.accuracy_standard);
  }
}

TEST(ConfusionMatrix, PublishedRowsSumToOne) {
  using Rows = std::array<std::array<double, tmon::kNumClasses>, tmon::kNumClasses>;
  for (const Rows* rows : {&tmon::testing::kYoloConfusion, &tmon::testing::kRcnnConfusion}) {
    EXPECT_LE(tmon::max_row_sum_deviation(std::span<const std::array<double, tmon::kNumClasses>>(*rows)),
              1e-6);
  }
}

TEST(ConfusionMatrix, PerfectPredictionsGiveIdentity) {
  std::vector<std::pair<ClassLabel, ClassLabel>> pairs;
  for (auto c : tmon::kAllClasses) pairs.emplace_back(c, c);
  const auto m = tmon::confusion_matrix(pairs);
  for (auto p : tmon::kAllClasses)
    for (auto t : tmon::kAllClasses) EXPECT_DOUBLE_EQ(m.at(p, t), p == t ? 1.0 : 0.0);
}

TEST(ConfusionMatrix, CarRowHandExample) {
  const std::vector<std::pair<ClassLabel, ClassLabel>> pairs{
      {ClassLabel::kCar, ClassLabel::kCar},
      {ClassLabel::kCar, ClassLabel::kCar},
      {ClassLabel::kCar, ClassLabel::kTruck}};
  const auto m = tmon::confusion_matrix(pairs);
  EXPECT_DOUBLE_EQ(m.at(ClassLabel::kCar, ClassLabel::kCar), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.at(ClassLabel::kCar, ClassLabel::kTruck), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.at(ClassLabel::kCar, ClassLabel::kBus), 0.0);
  EXPECT_EQ(m.row_support[tmon::index_of(ClassLabel::kCar)], 3);
  EXPECT_EQ(m.row_support[tmon::index_of(ClassLabel::kBus)], 0);
  EXPECT_LE(tmon::max_row_sum_deviation(m), 1e-12);
}

TEST(ConfusionMatrix, UnknownLabelThrows) {
  const std::vector<std::pair<std::string, std::string>> pairs{{"car", "van"}};
  EXPECT_THROW(tmon::confusion_matrix(pairs), tmon::ValidationError);
}

TEST(ConfusionMatrixProperty, MatchesHandCountOracle) {
  tmon::testing::TestRng rng(72);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(1, 30);
    std::vector<std::pair<ClassLabel, ClassLabel>> pairs;
    std::array<std::array<int, 5>, 5> counts{};
    for (int i = 0; i < n; ++i) {
      const int p = rng.integer(0, 4), t = rng.integer(0, 4);
      pairs.emplace_back(tmon::kAllClasses[p], tmon::kAllClasses[t]);
      ++counts[p][t];
    }
    const auto m = tmon::confusion_matrix(pairs);
    for (int p = 0; p < 5; ++p) {
      int row = 0;
      for (int t = 0; t < 5; ++t) row += counts[p][t];
      for (int t = 0; t < 5; ++t) {
        const double want = row == 0 ? 0.0 : static_cast<double>(counts[p][t]) / row;
        EXPECT_NEAR(m.cells[p][t], want, 1e-12);
      }
    }
    EXPECT_LE(tmon::max_row_sum_deviation(m), 1e-9);
  }
}

TEST(SwitchRate, IdenticalTracksGiveZero) {
  const std::vector<tmon::Track> gt{tmon::testing::linear_track(1, 0, 10, box(0, 0, 20, 20), 3, 0),
                                    tmon::testing::linear_track(2, 0, 10, box(0, 100, 20, 20), -3, 0)};
  EXPECT_DOUBLE_EQ(tmon::switch_rate(gt, gt), 0.0);
}

TEST(SwitchRate, OneSplitIsOneSwitch) {
  const auto gt = tmon::testing::linear_track(1, 0, 10, box(0, 0, 20, 20), 3, 0);
  auto first = gt;
  first.detections.resize(5);
  auto second = gt;
  second.track_id = 2;
  second.detections.erase(second.detections.begin(), second.detections.begin() + 5);
  EXPECT_DOUBLE_EQ(tmon::switch_rate(std::vector<tmon::Track>{first, second}, std::vector<tmon::Track>{gt}),
                   1.0);
}

TEST(SwitchRate, TwoSwitchesOverTenVehicles) {
  std::vector<tmon::Track> gt, pred;
  for (int v = 0; v < 10; ++v) {
    gt.push_back(tmon::testing::linear_track(v, 0, 10, box(0, 50.0 * v, 20, 20), 2, 0));
  }
  pred = gt;
  for (int v : {2, 7}) {
    auto tail = pred[v];
    tail.track_id = 100 + v;
    tail.detections.erase(tail.detections.begin(), tail.detections.begin() + 4);
    pred[v].detections.resize(4);
    pred.push_back(tail);
  }
  EXPECT_EQ(tmon::count_switches(pred, gt), 2);
  EXPECT_DOUBLE_EQ(tmon::switch_rate(pred, gt), 0.2);
}

TEST(SwitchRate, EmptyTruthIsUndefined) {
  EXPECT_THROW(tmon::switch_rate({}, {}), tmon::UndefinedMetricError);
}

TEST(MatchAnomalies, Examples) {
  const std::vector<tmon::AnomalyEvent> truth{at_s(105)};
  auto m = tmon::match_anomalies(std::vector<tmon::AnomalyEvent>{at_s(100)}, truth);
  EXPECT_EQ(m.tp.size(), 1u);
  EXPECT_DOUBLE_EQ(m.time_errors_s[0], 5.0);

  m = tmon::match_anomalies(std::vector<tmon::AnomalyEvent>{at_s(100)}, std::vector<tmon::AnomalyEvent>{at_s(115)});
  EXPECT_TRUE(m.tp.empty());
  EXPECT_EQ(m.fp.size(), 1u);
  EXPECT_EQ(m.fn.size(), 1u);

  m = tmon::match_anomalies(std::vector<tmon::AnomalyEvent>{at_s(100), at_s(108)}, truth);
  EXPECT_EQ(m.tp.size(), 1u);
  EXPECT_EQ(m.tp[0].first, 1u);  // the closer one wins
  EXPECT_EQ(m.fp.size(), 1u);
}

TEST(MatchAnomalies, CamerasDoNotMix) {
  const auto m = tmon::match_anomalies(std::vector<tmon::AnomalyEvent>{at_s(100, "a")},
                                       std::vector<tmon::AnomalyEvent>{at_s(100, "b")});
  EXPECT_TRUE(m.tp.empty());
}

TEST(MatchAnomaliesProperty, CountsBalance) {
  tmon::testing::TestRng rng(73);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<tmon::AnomalyEvent> pred, truth;
    for (int i = rng.integer(0, 8); i > 0; --i) pred.push_back(at_s(rng.integer(0, 200), rng.chance(0.8) ? "c" : "d"));
    for (int i = rng.integer(0, 8); i > 0; --i) truth.push_back(at_s(rng.integer(0, 200), rng.chance(0.8) ? "c" : "d"));
    const auto m = tmon::match_anomalies(pred, truth);
    EXPECT_EQ(m.tp.size() + m.fn.size(), truth.size());
    EXPECT_EQ(m.tp.size() + m.fp.size(), pred.size());
    for (double e : m.time_errors_s) EXPECT_LE(e, 10.0);
  }
}

TEST(S3, PublishedScoreReproduces) {
  const auto s = tmon::s3_from_rmse(tmon::testing::kAnomalyF1, tmon::testing::kAnomalyRmseS);
  EXPECT_NEAR(s.s3, tmon::testing::kAnomalyS3, 5e-4);
  EXPECT_NEAR(s.nrmse, tmon::testing::kAnomalyRmseS / 300.0, 1e-12);
  EXPECT_NEAR(s.s3, s.f1 * (1 - s.nrmse), 1e-9);
}

TEST(S3, PerfectAndSaturated) {
  const std::vector<double> zeros{0, 0, 0};
  EXPECT_DOUBLE_EQ(tmon::s3_score(1.0, zeros).s3, 1.0);
  EXPECT_DOUBLE_EQ(tmon::s3_score(0.7, {}).rmse_s, 0.0);
  const std::vector<double> big{400, 500};
  const auto s = tmon::s3_score(0.9, big);
  EXPECT_DOUBLE_EQ(s.nrmse, 1.0);
  EXPECT_DOUBLE_EQ(s.s3, 0.0);
}

TEST(S3, RmseIsRootMeanSquare) {
  const std::vector<double> e{3, 4};
  EXPECT_NEAR(tmon::s3_score(1.0, e).rmse_s, std::sqrt(12.5), 1e-12);
}

TEST(S3, FixtureThroughEvaluate) {
  const auto fx = tmon::testing::s3_fixture(tmon::testing::kAnomalyRmseS);
  tmon::EvalInputs in;
  in.truth = fx.truth;
  in.predicted_anomalies = fx.predicted;
  in.anomaly_window_s = fx.window_s;
  const auto r = tmon::evaluate(in);
  ASSERT_TRUE(r.anomaly && r.anomaly->score);
  EXPECT_EQ(r.anomaly->tp, 5);
  EXPECT_EQ(r.anomaly->fp, 1);
  EXPECT_EQ(r.anomaly->fn, 1);
  EXPECT_NEAR(r.anomaly->score->f1, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.anomaly->score->rmse_s, tmon::testing::kAnomalyRmseS, 1e-3);
  EXPECT_NEAR(r.anomaly->score->s3, tmon::testing::kAnomalyS3, 5e-4);
}

TEST(DetectionHeatmap, Examples) {
  auto h = tmon::detection_heatmap({}, 2, 2, 100, 100);
  for (auto v : h.tp) EXPECT_EQ(v, 0);
  const std::vector<tmon::OutcomePoint> one{{tmon::Outcome::kTruePositive, {50, 50}}};
  h = tmon::detection_heatmap(one, 2, 2, 100, 100);
  std::int64_t sum = 0;
  for (auto v : h.tp) sum += v;
  EXPECT_EQ(sum, 1);
  EXPECT_EQ(h.at(tmon::Outcome::kTruePositive, 1, 1), 1);
  const std::vector<tmon::OutcomePoint> edge{{tmon::Outcome::kFalseNegative, {100, 0}}};
  EXPECT_EQ(tmon::detection_heatmap(edge, 2, 2, 100, 100).at(tmon::Outcome::kFalseNegative, 0, 1), 1);
  const std::vector<tmon::OutcomePoint> out{{tmon::Outcome::kFalsePositive, {101, 5}}};
  EXPECT_THROW(tmon::detection_heatmap(out, 2, 2, 100, 100), tmon::ValidationError);
}

TEST(DetectionHeatmap, DropoutsInOneLaneConcentrateFalseNegatives) {
  const auto cfg = tmon::scenario_preset("freeway", 5);
  const auto sc = tmon::generate_scenario(cfg);
  const double lane_y = cfg.lanes[0].polyline.front().y;
  tmon::testing::TestRng rng(74);
  auto predicted = sc.truth.tracks;
  for (auto& t : predicted) {
    std::erase_if(t.detections, [&](const tmon::Detection& d) {
      return std::abs(d.box.center().y - lane_y) < 40 && rng.chance(0.3);
    });
  }
  const auto match = tmon::match_detections(predicted, sc.truth.tracks);
  const int rows = 6;
  const auto h = tmon::detection_heatmap(match.outcomes, rows, 4, cfg.width, cfg.height);
  const int lane_row = static_cast<int>(lane_y * rows / cfg.height);
  std::int64_t lane_fn = 0, all_fn = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < 4; ++c) {
      all_fn += h.at(tmon::Outcome::kFalseNegative, r, c);
      if (r == lane_row) lane_fn += h.at(tmon::Outcome::kFalseNegative, r, c);
    }
  ASSERT_GT(all_fn, 100);
  EXPECT_EQ(lane_fn, all_fn);
  for (auto v : h.fp) EXPECT_EQ(v, 0);
}

TEST(Evaluate, SimulatedTracksAgainstThemselves) {
  const auto sc = tmon::generate_scenario(tmon::scenario_preset("freeway", 2));
  tmon::EvalInputs in;
  in.truth = sc.truth;
  in.predicted_tracks = sc.truth.tracks;
  const auto r = tmon::evaluate(in);
  ASSERT_TRUE(r.switch_rate);
  EXPECT_DOUBLE_EQ(*r.switch_rate, 0.0);
  ASSERT_TRUE(r.confusion);
  for (auto c : tmon::kAllClasses) {
    if (r.confusion->row_support[tmon::index_of(c)] > 0) EXPECT_DOUBLE_EQ(r.confusion->at(c, c), 1.0);
  }
  const auto j = nlohmann::json::parse(tmon::eval_report_json(r));
  EXPECT_EQ(j.at("switch_rate").get<double>(), 0.0);
  EXPECT_TRUE(j.contains("confusion"));
  EXPECT_TRUE(j.contains("per_class_f1"));
}
