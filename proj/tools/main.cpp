// trafficmon: batch entry points for every pipeline stage plus the service.
//
// Exit codes: 0 ok, 1 invalid input, 2 usage error.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "trafficmon/anomaly.hpp"
#include "trafficmon/counting.hpp"
#include "trafficmon/errors.hpp"
#include "trafficmon/evaluation.hpp"
#include "trafficmon/formats.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/queue.hpp"
#include "trafficmon/service/http_server.hpp"
#include "trafficmon/service/service.hpp"
#include "trafficmon/simulator.hpp"
#include "trafficmon/tracking.hpp"

namespace tmon = trafficmon;

namespace {

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tmon::NotFoundError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tmon::Error("cannot write '" + path + "'");
  out << text;
}

// Frames grouped per camera, cameras in first-seen order.
std::vector<std::pair<std::string, std::vector<tmon::FrameDetections>>> frames_by_camera(
    std::vector<tmon::FrameDetections> frames) {
  std::vector<std::pair<std::string, std::vector<tmon::FrameDetections>>> out;
  std::map<std::string, std::size_t> index;
  for (auto& f : frames) {
    auto [it, fresh] = index.emplace(f.camera_id, out.size());
    if (fresh) out.push_back({f.camera_id, {}});
    out[it->second].second.push_back(std::move(f));
  }
  return out;
}

std::vector<tmon::FrameDetections> load_camera_frames(const std::string& log_path,
                                                    const std::string& camera,
                                                    std::string& camera_id_out) {
  auto groups = frames_by_camera(tmon::parse_detection_log(read_input(log_path)));
  if (groups.empty()) {
    camera_id_out = camera;
    return {};
  }
  if (camera.empty()) {
    if (groups.size() > 1) {
      throw tmon::ValidationError("log holds several cameras; pick one with --camera");
    }
    camera_id_out = groups.front().first;
    return std::move(groups.front().second);
  }
  for (auto& [id, frames] : groups) {
    if (id == camera) {
      camera_id_out = id;
      return std::move(frames);
    }
  }
  throw tmon::NotFoundError("camera '" + camera + "' not in log");
}

std::optional<tmon::CameraRecord> registry_camera(const std::string& registry_path,
                                                const std::string& camera_id) {
  if (registry_path.empty()) return std::nullopt;
  for (auto& c : tmon::load_camera_registry_file(registry_path)) {
    if (c.camera_id == camera_id) return c;
  }
  throw tmon::NotFoundError("camera '" + camera_id + "' not in registry");
}

std::vector<tmon::CountingLine> parse_lines_file(const std::string& path) {
  // Either a JSON array of counting lines or a registry-style camera record.
  const auto text = read_input(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    std::string wrapped = R"({"camera_id":"lines","name":"lines","frame_rate_fps":10,"counting_lines":)" + text + "}";
    return tmon::parse_camera_record(wrapped).counting_lines;
  }
  return tmon::parse_camera_record(text).counting_lines;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw tmon::ValidationError("expected CAMERA=PATH, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

struct TrackerFlags {
  std::string kind = "iou";
  tmon::IouTrackerConfig iou;
  tmon::FeatureTrackerConfig feature;
  bool dedup = false;
  double dedup_iou = 0.5;

  void add(CLI::App* app) {
    app->add_option("--tracker", kind, "iou | feature")->check(CLI::IsMember({"iou", "feature"}));
    app->add_option("--sigma-iou", iou.sigma_iou, "IOU match gate");
    app->add_option("--sigma-l", iou.sigma_l, "minimum score to open a track");
    app->add_option("--sigma-h", iou.sigma_h, "score a reported track must reach");
    app->add_option("--t-min", iou.t_min, "minimum reported track length (frames)");
    app->add_option("--max-cosine", feature.max_cosine_distance, "feature tracker appearance gate");
    app->add_option("--iou-gate", feature.iou_gate, "feature tracker IOU gate");
    app->add_option("--max-age", feature.max_age_frames, "frames a lost track survives");
    app->add_option("--min-length", feature.min_length, "feature tracker minimum track length");
  }
  tmon::Tracker make() const {
    return kind == "feature" ? tmon::Tracker(feature) : tmon::Tracker(iou);
  }
};

// ---------------------------------------------------------------------------

struct SimulateCmd {
  std::string preset = "freeway";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_out = "-";
  std::string truth_out;
  std::string queue_out;
  std::string masks_out;
  std::size_t mask_count = 0;
  bool print_config = false;

  int run() const {
    tmon::ScenarioConfig cfg = config.empty() ? tmon::scenario_preset(preset, seed.value_or(0))
                                            : tmon::parse_scenario_config(read_input(config));
    if (seed) cfg.seed = *seed;
    if (print_config) {
      write_output("-", tmon::scenario_config_json(cfg) + "\n");
      return 0;
    }
    const auto scenario = tmon::generate_scenario(cfg);
    std::ostringstream log;
    tmon::write_detection_log(log, scenario.frames);
    write_output(log_out, log.str());
    if (!truth_out.empty()) write_output(truth_out, tmon::format_ground_truth(scenario.truth));
    if (!queue_out.empty()) {
      std::string text;
      for (const auto& s : scenario.truth.queue) text += tmon::format_queue_sample(s) + "\n";
      write_output(queue_out, text);
    }
    if (!masks_out.empty()) {
      std::string text;
      for (const auto& m : tmon::generate_queue_masks(mask_count, cfg.width, cfg.height,
                                                    cfg.camera_id, cfg.seed)) {
        text += tmon::format_queue_mask_sample(m) + "\n";
      }
      write_output(masks_out, text);
    }
    return 0;
  }
};

struct TrackCmd {
  std::string log = "-";
  std::string out = "-";
  TrackerFlags flags;

  int run() const {
    std::string text;
    for (auto& [cam, frames] : frames_by_camera(tmon::parse_detection_log(read_input(log)))) {
      if (flags.dedup) {
        for (auto& f : frames) f = tmon::dedup_detections(f, flags.dedup_iou);
      }
      const auto tracks = tmon::run_tracker(frames, flags.make());
      text += tmon::format_track_dump(cam, tracks);
    }
    write_output(out, text);
    return 0;
  }
};

struct QueueCmd {
  std::string samples = "-";
  std::string camera;
  double k = 1.0;
  int min_history_days = 7;
  int bin_minutes = 1;
  std::string thresholds_in;
  std::string thresholds_out = "-";
  std::string heatmap_out;
  std::string heatmap_format = "csv";
  std::string lengths_out;

  int run() const {
    auto all = tmon::parse_queue_samples(read_input(samples));
    std::vector<tmon::QueueSample> mine;
    std::optional<std::string> seen;
    for (auto& s : all) {
      if (!camera.empty() && s.camera_id != camera) continue;
      if (camera.empty() && seen && *seen != s.camera_id) {
        throw tmon::ValidationError("samples hold several cameras; pick one with --camera");
      }
      seen = s.camera_id;
      mine.push_back(std::move(s));
    }
    if (!lengths_out.empty()) {
      std::string text;
      for (const auto& s : mine) text += tmon::format_queue_sample(s) + "\n";
      write_output(lengths_out, text);
    }
    const tmon::SeverityThresholds th =
        thresholds_in.empty() ? tmon::compute_thresholds(mine, {k, min_history_days, bin_minutes})
                              : tmon::parse_thresholds_json(read_input(thresholds_in));
    write_output(thresholds_out, tmon::thresholds_json(th) + "\n");
    if (!heatmap_out.empty()) {
      std::int64_t first = 0, last = -1;
      for (const auto& s : mine) {
        const auto d = tmon::day_index(s.timestamp_ms);
        if (last < first) first = last = d;
        first = std::min(first, d);
        last = std::max(last, d);
      }
      const auto map = tmon::severity_heatmap(mine, th, first, static_cast<int>(last - first + 1),
                                            bin_minutes);
      write_output(heatmap_out,
                   heatmap_format == "json" ? tmon::heatmap_json(map) + "\n" : tmon::heatmap_csv(map));
    }
    return 0;
  }
};

struct AnomalyCmd {
  std::string log = "-";
  std::string camera;
  std::string registry;
  std::string road = "auto";
  std::string policy = "reject";
  bool no_dedup = false;
  bool confirmed_only = false;
  std::string out = "-";
  TrackerFlags flags;

  int run() const {
    std::string cam;
    const auto frames = load_camera_frames(log, camera, cam);
    tmon::AnomalyRunOptions opts;
    opts.tracker = flags.iou;
    opts.dedup = !no_dedup;
    opts.monitor.anomaly.intersection_policy = tmon::parse_intersection_policy(policy);
    if (auto rec = registry_camera(registry, cam); rec && rec->road_type_override) {
      opts.monitor.road_type_override = rec->road_type_override;
    }
    if (road == "freeway") opts.monitor.road_type_override = tmon::RoadType::kFreeway;
    if (road == "intersection") opts.monitor.road_type_override = tmon::RoadType::kIntersection;
    const auto report = tmon::detect_anomalies(frames, cam, opts);
    std::string text;
    for (const auto& e : report.events) {
      if (confirmed_only && e.status != tmon::AnomalyStatus::kConfirmed) continue;
      text += tmon::format_anomaly_event(e) + "\n";
    }
    write_output(out, text);
    return 0;
  }
};

struct CountCmd {
  std::string log = "-";
  std::string camera;
  std::string lines;
  std::string registry;
  std::int64_t window_ms = 60000;
  bool no_dedup = false;
  std::string out = "-";
  TrackerFlags flags;

  int run() const {
    std::string cam;
    auto frames = load_camera_frames(log, camera, cam);
    std::vector<tmon::CountingLine> counting;
    if (!lines.empty()) {
      counting = parse_lines_file(lines);
    } else if (auto rec = registry_camera(registry, cam)) {
      counting = rec->counting_lines;
    } else {
      throw tmon::ValidationError("count needs --lines or --registry");
    }
    if (!no_dedup) {
      for (auto& f : frames) f = tmon::dedup_detections(f, flags.dedup_iou);
    }
    const auto tracks = tmon::run_tracker(frames, flags.make());
    write_output(out, tmon::format_count_csv(tmon::count_tracks(tracks, counting), window_ms));
    return 0;
  }
};

struct EvalCmd {
  std::string truth;
  std::string tracks;
  std::string anomalies;
  std::string counts;
  double match_iou = 0.5;
  double window_s = 10.0;
  double nrmse_min = 0.0;
  double nrmse_max = 300.0;
  std::string out = "-";

  int run() const {
    tmon::EvalInputs in;
    in.truth = tmon::parse_ground_truth(read_input(truth));
    if (!tracks.empty()) {
      for (auto& c : tmon::parse_track_dump(read_input(tracks))) {
        if (c.camera_id != in.truth->camera_id && !in.truth->camera_id.empty()) continue;
        for (auto& t : c.tracks) in.predicted_tracks.push_back(std::move(t));
      }
    }
    if (!anomalies.empty()) in.predicted_anomalies = tmon::parse_anomaly_events(read_input(anomalies));
    if (!counts.empty()) in.predicted_counts = tmon::parse_count_csv(read_input(counts));
    in.match_iou = match_iou;
    in.anomaly_window_s = window_s;
    in.nrmse_min = nrmse_min;
    in.nrmse_max = nrmse_max;
    write_output(out, tmon::eval_report_json(tmon::evaluate(in)) + "\n");
    return 0;
  }
};

std::atomic<bool> g_stop{false};

struct ServeCmd {
  std::string registry;
  std::string storage = "trafficmon-data";
  std::string listen = "127.0.0.1:8080";
  std::vector<std::string> feeds;
  std::vector<std::string> queue_feeds;
  double stale_after_s = 60.0;

  int run() const {
    tmon::service::ServiceConfig cfg;
    cfg.storage_root = storage;
    cfg.stale_after = std::chrono::milliseconds(static_cast<std::int64_t>(stale_after_s * 1000.0));
    tmon::service::TrafficService service(cfg);
    if (!registry.empty()) {
      for (auto& c : tmon::load_camera_registry_file(registry)) service.register_camera(std::move(c));
    }
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw tmon::ValidationError("--listen expects HOST:PORT");
    tmon::service::HttpOptions http;
    http.host = listen.substr(0, colon);
    http.port = std::stoi(listen.substr(colon + 1));

    // Per-camera replay inputs.
    std::map<std::string, std::vector<tmon::FrameDetections>> frame_feeds;
    std::map<std::string, std::vector<tmon::QueueSample>> sample_feeds;
    for (const auto& f : feeds) {
      auto [cam, path] = split_assignment(f);
      frame_feeds[cam] = tmon::parse_detection_log(read_input(path));
    }
    for (const auto& f : queue_feeds) {
      auto [cam, path] = split_assignment(f);
      sample_feeds[cam] = tmon::parse_queue_samples(read_input(path));
    }

    tmon::service::HttpServer server(service, http);
    const int port = server.start();
    std::cerr << "listening on " << http.host << ":" << port << "\n";

    std::vector<std::string> cams;
    for (const auto& [c, _] : frame_feeds) cams.push_back(c);
    for (const auto& [c, _] : sample_feeds) {
      if (!frame_feeds.contains(c)) cams.push_back(c);
    }
    std::vector<std::thread> workers;
    for (const auto& cam : cams) {
      workers.emplace_back([&, cam] {
        try {
          static const std::vector<tmon::FrameDetections> kNoFrames;
          static const std::vector<tmon::QueueSample> kNoSamples;
          const auto fit = frame_feeds.find(cam);
          const auto sit = sample_feeds.find(cam);
          tmon::service::replay(service, cam, fit == frame_feeds.end() ? kNoFrames : fit->second,
                              sit == sample_feeds.end() ? kNoSamples : sit->second);
          std::cerr << "feed " << cam << " done\n";
        } catch (const std::exception& e) {
          std::cerr << "feed " << cam << ": " << e.what() << "\n";
        }
      });
    }
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
      service.sweep_stale(std::chrono::steady_clock::now());
    }
    for (auto& w : workers) w.join();
    server.stop();
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trafficmon: traffic camera analytics engine"};
  app.require_subcommand(1);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "generate a synthetic detection log and ground truth");
  s->add_option("--preset", sim.preset, "scenario preset")
      ->check(CLI::IsMember(tmon::scenario_preset_names()));
  s->add_option("--config", sim.config, "scenario config JSON (overrides --preset)");
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--log", sim.log_out, "detection log output ('-' = stdout)");
  s->add_option("--truth", sim.truth_out, "ground-truth output");
  s->add_option("--queue-out", sim.queue_out, "queue PL sample output");
  s->add_option("--masks-out", sim.masks_out, "queue mask sample output");
  s->add_option("--mask-count", sim.mask_count, "number of queue masks");
  s->add_flag("--print-config", sim.print_config, "print the resolved config and exit");

  TrackCmd track;
  auto* t = app.add_subcommand("track", "detection log -> track dump");
  t->add_option("--log", track.log, "detection log ('-' = stdin)");
  t->add_option("--out", track.out, "track dump output");
  t->add_flag("--dedup", track.flags.dedup, "suppress duplicate boxes before tracking");
  track.flags.add(t);

  QueueCmd queue;
  auto* q = app.add_subcommand("queue", "queue samples or masks -> thresholds and heatmap");
  q->add_option("--samples", queue.samples, "queue sample lines ('-' = stdin)");
  q->add_option("--camera", queue.camera, "camera to use when samples hold several");
  q->add_option("--k", queue.k, "std multiplier of the thresholds");
  q->add_option("--min-history-days", queue.min_history_days, "days of history required");
  q->add_option("--bin-minutes", queue.bin_minutes, "time-of-day bin width");
  q->add_option("--thresholds", queue.thresholds_in, "use these thresholds instead of computing");
  q->add_option("--thresholds-out", queue.thresholds_out, "thresholds JSON output");
  q->add_option("--heatmap-out", queue.heatmap_out, "severity heatmap output");
  q->add_option("--heatmap-format", queue.heatmap_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  q->add_option("--lengths-out", queue.lengths_out, "per-sample pixel lengths output");

  AnomalyCmd anomaly;
  auto* a = app.add_subcommand("anomaly", "detection log -> anomaly events");
  a->add_option("--log", anomaly.log, "detection log ('-' = stdin)");
  a->add_option("--camera", anomaly.camera, "camera to use when the log holds several");
  a->add_option("--registry", anomaly.registry, "camera registry (road type override)");
  a->add_option("--road", anomaly.road, "auto | freeway | intersection")
      ->check(CLI::IsMember({"auto", "freeway", "intersection"}));
  a->add_option("--policy", anomaly.policy, "intersection policy: reject | confirm_60s")
      ->check(CLI::IsMember({"reject", "confirm_60s"}));
  a->add_flag("--no-dedup", anomaly.no_dedup, "skip duplicate suppression");
  a->add_flag("--confirmed-only", anomaly.confirmed_only, "emit confirmed events only");
  a->add_option("--out", anomaly.out, "anomaly export output");
  anomaly.flags.add(a);

  CountCmd count;
  auto* c = app.add_subcommand("count", "detection log + counting lines -> count CSV");
  c->add_option("--log", count.log, "detection log ('-' = stdin)");
  c->add_option("--camera", count.camera, "camera to use when the log holds several");
  c->add_option("--lines", count.lines, "counting lines JSON");
  c->add_option("--registry", count.registry, "camera registry holding the lines");
  c->add_option("--window-ms", count.window_ms, "count window length");
  c->add_flag("--no-dedup", count.no_dedup, "skip duplicate suppression");
  c->add_option("--out", count.out, "count CSV output");
  count.flags.add(c);

  EvalCmd eval;
  auto* e = app.add_subcommand("eval", "predictions + ground truth -> metric report");
  e->add_option("--truth", eval.truth, "ground-truth file")->required();
  e->add_option("--tracks", eval.tracks, "predicted track dump");
  e->add_option("--anomalies", eval.anomalies, "predicted anomaly export");
  e->add_option("--counts", eval.counts, "predicted count CSV");
  e->add_option("--match-iou", eval.match_iou, "IOU for detection matching");
  e->add_option("--match-window-s", eval.window_s, "anomaly start-time match window");
  e->add_option("--nrmse-min", eval.nrmse_min, "lower RMSE normalization bound (s)");
  e->add_option("--nrmse-max", eval.nrmse_max, "upper RMSE normalization bound (s)");
  e->add_option("--out", eval.out, "report output");

  ServeCmd serve;
  auto* v = app.add_subcommand("serve", "run the HTTP + event-stream service");
  v->add_option("--registry", serve.registry, "camera registry JSON");
  v->add_option("--storage", serve.storage, "storage root");
  v->add_option("--listen", serve.listen, "HOST:PORT (port 0 picks one)");
  v->add_option("--feed", serve.feeds, "CAMERA=LOG detection log to replay");
  v->add_option("--queue-feed", serve.queue_feeds, "CAMERA=FILE queue samples to replay");
  v->add_option("--stale-after-s", serve.stale_after_s, "seconds of silence before stale");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (*s) return sim.run();
    if (*t) return track.run();
    if (*q) return queue.run();
    if (*a) return anomaly.run();
    if (*c) return count.run();
    if (*e) return eval.run();
    if (*v) return serve.run();
  } catch (const tmon::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
