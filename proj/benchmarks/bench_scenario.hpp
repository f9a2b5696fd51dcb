#pragma once

#include "trafficmon/simulator.hpp"

namespace trafficmon::bench {

// Four busy lanes for ten minutes; stays at or under 20 boxes per frame.
inline const std::vector<FrameDetections>& busy_frames() {
  static const auto frames = [] {
    ScenarioConfig c = scenario_preset("busy", 1);
    c.camera_id = "perf";
    c.duration_s = 600.0;
    c.lanes.resize(4);
    for (auto& lane : c.lanes) lane.rate_per_min = {0.0, 0.0, 9.0, 0.7, 1.3};
    return generate_scenario(c).frames;
  }();
  return frames;
}

inline CameraRecord busy_camera() {
  const ScenarioConfig c = scenario_preset("busy", 1);
  CameraRecord cam;
  cam.camera_id = "perf";
  cam.name = "perf";
  cam.frame_rate_fps = c.frame_rate_fps;
  cam.counting_lines = c.counting_lines;
  return cam;
}

}  // namespace trafficmon::bench
