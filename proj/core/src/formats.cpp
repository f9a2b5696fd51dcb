#include "trafficmon/formats.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "json_codec.hpp"
#include "trafficmon/errors.hpp"

namespace trafficmon {

namespace {

using codec::json;

json detection_row(const std::string& cam, std::int64_t track_id, const Detection& d) {
  return json{{"cam", cam},
              {"track", track_id},
              {"frame", d.frame_index},
              {"ts_ms", d.timestamp_ms},
              {"box", codec::to_json(d.box)},
              {"cls", std::string(to_string(d.class_label))},
              {"score", d.score}};
}

Detection detection_from_row(const json& j) {
  Detection d;
  d.frame_index = codec::require(j, "frame").get<std::int64_t>();
  d.timestamp_ms = codec::require(j, "ts_ms").get<std::int64_t>();
  d.box = codec::box_from_json(codec::require(j, "box"));
  d.class_label = parse_class_label(codec::require(j, "cls").get<std::string>());
  d.score = j.value("score", 1.0);
  return d;
}

template <typename Fn>
void for_each_json_line(std::string_view text, Fn&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidGeometryError& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

void sort_tracks(std::vector<Track>& tracks) {
  std::sort(tracks.begin(), tracks.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  for (auto& t : tracks) {
    std::stable_sort(t.detections.begin(), t.detections.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.frame_index < b.frame_index;
                     });
  }
}

}  // namespace

std::string format_track_dump(const std::string& camera_id, std::span<const Track> tracks) {
  std::vector<const Track*> order;
  for (const auto& t : tracks) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const Track* a, const Track* b) { return a->track_id < b->track_id; });
  std::string out;
  for (const Track* t : order) {
    for (const auto& d : t->detections) {
      out += detection_row(camera_id, t->track_id, d).dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<CameraTracks> parse_track_dump(std::string_view text) {
  std::vector<CameraTracks> cams;
  std::map<std::string, std::size_t> cam_index;
  std::vector<std::map<std::int64_t, std::size_t>> track_index;
  for_each_json_line(text, [&](const json& j) {
    const auto cam = j.value("cam", std::string());
    auto [it, fresh] = cam_index.emplace(cam, cams.size());
    if (fresh) {
      cams.push_back({cam, {}});
      track_index.emplace_back();
    }
    auto& entry = cams[it->second];
    const auto id = codec::require(j, "track").get<std::int64_t>();
    auto [tit, tfresh] = track_index[it->second].emplace(id, entry.tracks.size());
    if (tfresh) {
      Track t;
      t.track_id = id;
      t.state = TrackState::kFinished;
      entry.tracks.push_back(std::move(t));
    }
    entry.tracks[tit->second].detections.push_back(detection_from_row(j));
  });
  for (auto& c : cams) sort_tracks(c.tracks);
  return cams;
}

std::int64_t GroundTruth::line_total(const std::string& line) const {
  std::int64_t n = 0;
  for (const auto& c : counts) {
    if (c.line == line) n += c.count;
  }
  return n;
}

std::string format_ground_truth(const GroundTruth& truth) {
  std::string out;
  auto emit = [&out](json j) {
    out += j.dump();
    out += '\n';
  };
  std::vector<Track> tracks = truth.tracks;
  sort_tracks(tracks);
  for (const auto& t : tracks) {
    for (const auto& d : t.detections) {
      json j{{"type", "track"}};
      j.update(detection_row(truth.camera_id, t.track_id, d));
      emit(std::move(j));
    }
  }
  for (const auto& c : truth.counts) {
    emit(json{{"type", "count"},
              {"cam", truth.camera_id},
              {"line", c.line},
              {"cls", std::string(to_string(c.class_label))},
              {"dir", std::string(1, sign_char(c.sign))},
              {"count", c.count}});
  }
  for (const auto& a : truth.anomalies) {
    json j{{"type", "anomaly"}};
    j.update(json::parse(format_anomaly_event(a)));
    emit(std::move(j));
  }
  for (const auto& w : truth.frozen_windows) {
    emit(json{{"type", "frozen"},
              {"cam", truth.camera_id},
              {"start_ts_ms", w.start_ts_ms},
              {"end_ts_ms", w.end_ts_ms}});
  }
  for (const auto& q : truth.queue) {
    json j{{"type", "queue"}};
    j.update(json::parse(format_queue_sample(q)));
    emit(std::move(j));
  }
  return out;
}

GroundTruth parse_ground_truth(std::string_view text) {
  GroundTruth truth;
  std::map<std::int64_t, std::size_t> track_index;
  bool have_cam = false;
  for_each_json_line(text, [&](const json& j) {
    const auto type = codec::require(j, "type").get<std::string>();
    if (auto it = j.find("cam"); it != j.end()) {
      const auto cam = it->get<std::string>();
      if (!have_cam) {
        truth.camera_id = cam;
        have_cam = true;
      } else if (cam != truth.camera_id) {
        throw ValidationError("ground truth mixes cameras '" + truth.camera_id + "' and '" +
                              cam + "'");
      }
    }
    if (type == "track") {
      const auto id = codec::require(j, "track").get<std::int64_t>();
      auto [it, fresh] = track_index.emplace(id, truth.tracks.size());
      if (fresh) {
        Track t;
        t.track_id = id;
        t.state = TrackState::kFinished;
        truth.tracks.push_back(std::move(t));
      }
      truth.tracks[it->second].detections.push_back(detection_from_row(j));
    } else if (type == "count") {
      CountTruth c;
      c.line = codec::require(j, "line").get<std::string>();
      c.class_label = parse_class_label(codec::require(j, "cls").get<std::string>());
      const auto dir = codec::require(j, "dir").get<std::string>();
      if (dir != "+" && dir != "-") throw ValidationError("dir must be '+' or '-'");
      c.sign = dir == "+" ? CrossingSign::kPositive : CrossingSign::kNegative;
      c.count = codec::require(j, "count").get<std::int64_t>();
      truth.counts.push_back(std::move(c));
    } else if (type == "anomaly") {
      auto events = parse_anomaly_events(j.dump());
      truth.anomalies.push_back(std::move(events.front()));
    } else if (type == "queue") {
      auto samples = parse_queue_samples(j.dump());
      truth.queue.push_back(std::move(samples.front()));
    } else if (type == "frozen") {
      truth.frozen_windows.push_back({codec::require(j, "start_ts_ms").get<std::int64_t>(),
                                      codec::require(j, "end_ts_ms").get<std::int64_t>()});
    } else {
      throw ValidationError("unknown ground-truth line type '" + type + "'");
    }
  });
  sort_tracks(truth.tracks);
  return truth;
}

}  // namespace trafficmon
