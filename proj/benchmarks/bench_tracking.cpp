#include <benchmark/benchmark.h>

#include "bench_scenario.hpp"
#include "trafficmon/counting.hpp"
#include "trafficmon/geometry.hpp"
#include "trafficmon/tracking.hpp"

namespace tmon = trafficmon;

static void BM_IouTracker(benchmark::State& state) {
  const auto& frames = tmon::bench::busy_frames();
  for (auto _ : state) {
    tmon::Tracker tracker{tmon::IouTrackerConfig{}};
    for (const auto& f : frames) benchmark::DoNotOptimize(tracker.step(f));
    benchmark::DoNotOptimize(tracker.flush());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
  state.SetLabel("items = frames");
}
BENCHMARK(BM_IouTracker)->Unit(benchmark::kMillisecond);

static void BM_FeatureTracker(benchmark::State& state) {
  const auto& frames = tmon::bench::busy_frames();
  for (auto _ : state) {
    tmon::Tracker tracker{tmon::FeatureTrackerConfig{}};
    for (const auto& f : frames) benchmark::DoNotOptimize(tracker.step(f));
    benchmark::DoNotOptimize(tracker.flush());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_FeatureTracker)->Unit(benchmark::kMillisecond);

static void BM_Dedup(benchmark::State& state) {
  const auto& frames = tmon::bench::busy_frames();
  for (auto _ : state)
    for (const auto& f : frames) benchmark::DoNotOptimize(tmon::dedup_detections(f));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_Dedup)->Unit(benchmark::kMillisecond);

static void BM_Iou(benchmark::State& state) {
  const tmon::BoundingBox a{10, 10, 40, 30}, b{25, 15, 40, 30};
  for (auto _ : state) benchmark::DoNotOptimize(tmon::iou(a, b));
}
BENCHMARK(BM_Iou);
