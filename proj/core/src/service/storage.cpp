#include "trafficmon/service/storage.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "trafficmon/errors.hpp"

namespace trafficmon::service {

namespace fs = std::filesystem;

void validate_camera_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.size() > 128) {
    throw ValidationError("invalid camera id '" + id + "'");
  }
  for (const char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) throw ValidationError("camera id '" + id + "' has characters outside [A-Za-z0-9._-]");
  }
}

AggregateStore::AggregateStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path AggregateStore::segment_path(const std::string& camera_id, std::int64_t day) const {
  return root_ / camera_id / (day_string(day) + ".jsonl");
}

std::vector<std::int64_t> AggregateStore::days(const std::string& camera_id) const {
  std::vector<std::int64_t> out;
  const fs::path dir = root_ / camera_id;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".jsonl" || name.size() != 16) continue;
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(name.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) continue;
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) continue;
    out.push_back(sys_days{ymd}.time_since_epoch().count());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::int64_t> AggregateStore::load_last_minute(const std::string& camera_id) const {
  const auto all_days = days(camera_id);
  for (auto it = all_days.rbegin(); it != all_days.rend(); ++it) {
    std::ifstream in(segment_path(camera_id, *it));
    std::string line, last;
    while (std::getline(in, line)) {
      if (!line.empty()) last = line;
    }
    if (!last.empty()) return parse_minute_aggregate(last).minute_start_ts;
  }
  return std::nullopt;
}

std::optional<std::int64_t> AggregateStore::last_minute(const std::string& camera_id) const {
  std::lock_guard lock(mutex_);
  auto it = last_minute_.find(camera_id);
  if (it == last_minute_.end()) it = last_minute_.emplace(camera_id, load_last_minute(camera_id)).first;
  return it->second;
}

bool AggregateStore::append(const MinuteAggregate& agg) {
  validate_camera_id(agg.camera_id);
  std::lock_guard lock(mutex_);
  auto it = last_minute_.find(agg.camera_id);
  if (it == last_minute_.end()) {
    it = last_minute_.emplace(agg.camera_id, load_last_minute(agg.camera_id)).first;
  }
  if (it->second && agg.minute_start_ts <= *it->second) return false;
  const fs::path path = segment_path(agg.camera_id, day_index(agg.minute_start_ts));
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  out << minute_aggregate_json(agg) << '\n';
  out.flush();
  if (!out) throw Error("failed to append to " + path.string());
  it->second = agg.minute_start_ts;
  return true;
}

std::vector<MinuteAggregate> AggregateStore::read(const std::string& camera_id,
                                                  std::int64_t from_ts, std::int64_t to_ts) const {
  std::vector<MinuteAggregate> out;
  if (to_ts <= from_ts) return out;
  const std::int64_t first_day = day_index(from_ts);
  const std::int64_t last_day = day_index(to_ts - 1);
  for (const auto d : days(camera_id)) {
    if (d < first_day || d > last_day) continue;
    std::ifstream in(segment_path(camera_id, d));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto agg = parse_minute_aggregate(line);
      if (agg.minute_start_ts >= from_ts && agg.minute_start_ts < to_ts) out.push_back(std::move(agg));
    }
  }
  return out;
}

}  // namespace trafficmon::service
