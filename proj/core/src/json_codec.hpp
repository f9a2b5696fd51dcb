#pragma once

// JSON encoders/decoders shared by the core and service sources. Private to
// the build; public headers stay free of the JSON dependency.

#include <json.hpp>

#include "trafficmon/anomaly.hpp"
#include "trafficmon/ingest.hpp"
#include "trafficmon/pipeline.hpp"
#include "trafficmon/types.hpp"

namespace trafficmon::codec {

using nlohmann::json;

json to_json(const CountingLine& line);
CountingLine counting_line_from_json(const json& j);

json to_json(const CameraRecord& camera);
CameraRecord camera_from_json(const json& j);

json to_json(const BoundingBox& box);
BoundingBox box_from_json(const json& j);

json to_json(const MaskEncoding& mask);
MaskEncoding mask_from_json(const json& j);

json to_json(const AnomalyEvent& event);
AnomalyEvent anomaly_from_json(const json& j);

json to_json(const MinuteAggregate& agg);
MinuteAggregate aggregate_from_json(const json& j);

json to_json(const CameraStatus& status);

// Required-field accessor that throws ValidationError naming the key.
const json& require(const json& j, const char* key);

}  // namespace trafficmon::codec
