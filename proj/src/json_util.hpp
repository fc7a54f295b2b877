#pragma once

// Internal JSON helpers shared by the serialization units.

#include <json.hpp>
#include <string>

#include "kdpose/geometry.hpp"
#include "kdpose/network.hpp"

namespace kdpose {

using json = nlohmann::json;

json parse_json_file(const std::string& path);
json parse_json_text(const std::string& text, const std::string& what);
void write_json_file(const json& j, const std::string& path);

/// Access j[key], raising a parse error naming the missing field.
const json& require_field(const json& j, const char* key, const std::string& what);

json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const json& j);

json intrinsics_to_json(const CameraIntrinsics& intrinsics);
CameraIntrinsics intrinsics_from_json(const json& j);

json pose_to_json(const Pose& pose);
Pose pose_from_json(const json& j);

json object_model_to_json(const ObjectModel& model);
ObjectModel object_model_from_json(const json& j);

} // namespace kdpose
