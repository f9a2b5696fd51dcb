#include <benchmark/benchmark.h>

#include "bench_scenario.hpp"
#include "trafficmon/anomaly.hpp"
#include "trafficmon/pipeline.hpp"
#include "trafficmon/queue.hpp"

namespace tmon = trafficmon;

static void BM_CameraPipeline(benchmark::State& state) {
  const auto& frames = tmon::bench::busy_frames();
  for (auto _ : state) {
    tmon::CameraPipeline p(tmon::bench::busy_camera(), {});
    for (const auto& f : frames) benchmark::DoNotOptimize(p.process_frame(f));
    benchmark::DoNotOptimize(p.finish());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
  state.SetLabel("items = frames");
}
BENCHMARK(BM_CameraPipeline)->Unit(benchmark::kMillisecond);

static void BM_DetectAnomalies(benchmark::State& state) {
  const auto& frames = tmon::bench::busy_frames();
  for (auto _ : state) benchmark::DoNotOptimize(tmon::detect_anomalies(frames, "perf", {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_DetectAnomalies)->Unit(benchmark::kMillisecond);

static void BM_MaskPixelLength(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  tmon::BitMask mask(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if ((x - side / 2) * (x - side / 2) + (y - side / 2) * (y - side / 2) < side * side / 4) mask.set(x, y);
  for (auto _ : state) benchmark::DoNotOptimize(tmon::mask_pixel_length(mask));
}
BENCHMARK(BM_MaskPixelLength)->Arg(64)->Arg(256)->Arg(1024);
