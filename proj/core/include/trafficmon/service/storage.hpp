#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "trafficmon/pipeline.hpp"

namespace trafficmon::service {

// Append-only daily segments: <root>/<camera>/<YYYY-MM-DD>.jsonl, one
// MinuteAggregate per line in time order.
class AggregateStore {
 public:
  explicit AggregateStore(std::filesystem::path root);

  // Writes the record unless its minute is not newer than the camera's last
  // stored minute (so replays never duplicate). Returns whether it was
  // written.
  bool append(const MinuteAggregate& agg);

  // Records with from_ts <= minute_start_ts < to_ts, in time order.
  std::vector<MinuteAggregate> read(const std::string& camera_id, std::int64_t from_ts,
                                    std::int64_t to_ts) const;
  std::optional<std::int64_t> last_minute(const std::string& camera_id) const;
  // Day indexes that have a segment file, ascending.
  std::vector<std::int64_t> days(const std::string& camera_id) const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path segment_path(const std::string& camera_id, std::int64_t day) const;

 private:
  std::optional<std::int64_t> load_last_minute(const std::string& camera_id) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::optional<std::int64_t>> last_minute_;
};

// Rejects ids that cannot be used as a directory name.
void validate_camera_id(const std::string& camera_id);

}  // namespace trafficmon::service
