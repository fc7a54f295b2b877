#include "json_util.hpp"

#include <fstream>

namespace kdpose {

json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, "malformed JSON in " + path + ": " + e.what());
    }
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, "malformed JSON in " + what + ": " + e.what());
    }
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::io, "cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) raise(ErrorCode::io, "short write to " + path);
}

const json& require_field(const json& j, const char* key, const std::string& what) {
    const auto it = j.find(key);
    if (it == j.end()) raise(ErrorCode::parse, what + ": missing field '" + key + "'");
    return *it;
}

json network_spec_to_json(const NetworkSpec& spec) {
    return json{{"role", net_role_name(spec.role)},
                {"stem_channels", {spec.stem_channels1, spec.stem_channels2}},
                {"backbone_blocks", spec.backbone_blocks},
                {"backbone_channels", spec.backbone_channels},
                {"keypoints", spec.keypoints},
                {"classes", spec.classes}};
}

NetworkSpec network_spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.role = net_role_from_name(require_field(j, "role", "network spec").get<std::string>());
    const auto& stem = require_field(j, "stem_channels", "network spec");
    if (!stem.is_array() || stem.size() != 2)
        raise(ErrorCode::parse, "network spec: stem_channels must be a 2-element array");
    spec.stem_channels1 = stem[0].get<int>();
    spec.stem_channels2 = stem[1].get<int>();
    spec.backbone_blocks = require_field(j, "backbone_blocks", "network spec").get<int>();
    spec.backbone_channels = require_field(j, "backbone_channels", "network spec").get<int>();
    spec.keypoints = require_field(j, "keypoints", "network spec").get<int>();
    spec.classes = require_field(j, "classes", "network spec").get<int>();
    spec.validate();
    return spec;
}

json intrinsics_to_json(const CameraIntrinsics& intrinsics) {
    return json{{"fx", intrinsics.fx},
                {"fy", intrinsics.fy},
                {"cx", intrinsics.cx},
                {"cy", intrinsics.cy}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
    CameraIntrinsics k;
    k.fx = require_field(j, "fx", "intrinsics").get<double>();
    k.fy = require_field(j, "fy", "intrinsics").get<double>();
    k.cx = require_field(j, "cx", "intrinsics").get<double>();
    k.cy = require_field(j, "cy", "intrinsics").get<double>();
    validate_intrinsics(k);
    return k;
}

json pose_to_json(const Pose& pose) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        rot.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
    return json{{"rotation", rot},
                {"translation",
                 {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const json& j) {
    Pose pose;
    const auto& rot = require_field(j, "rotation", "pose");
    const auto& t = require_field(j, "translation", "pose");
    if (!rot.is_array() || rot.size() != 3 || !t.is_array() || t.size() != 3)
        raise(ErrorCode::parse, "pose: rotation must be 3x3 and translation length 3");
    for (int r = 0; r < 3; ++r) {
        if (!rot[r].is_array() || rot[r].size() != 3)
            raise(ErrorCode::parse, "pose: rotation must be 3x3");
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot[r][c].get<double>();
    }
    for (int c = 0; c < 3; ++c) pose.translation(c) = t[c].get<double>();
    return pose;
}

json object_model_to_json(const ObjectModel& model) {
    json points = json::array();
    for (const auto& p : model.points) points.push_back({p.x(), p.y(), p.z()});
    json keypoints = json::array();
    for (const auto& p : model.keypoints3d) keypoints.push_back({p.x(), p.y(), p.z()});
    return json{{"name", model.name},
                {"class_id", model.class_id},
                {"points", points},
                {"keypoints3d", keypoints},
                {"diameter", model.diameter},
                {"symmetric", model.symmetric}};
}

ObjectModel object_model_from_json(const json& j) {
    ObjectModel model;
    model.name = require_field(j, "name", "object model").get<std::string>();
    model.class_id = require_field(j, "class_id", "object model").get<int>();
    for (const auto& p : require_field(j, "points", "object model"))
        model.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    const auto& kps = require_field(j, "keypoints3d", "object model");
    if (!kps.is_array() || kps.size() != 9)
        raise(ErrorCode::parse, "object model: keypoints3d must have 9 entries");
    for (int i = 0; i < 9; ++i)
        model.keypoints3d[i] =
            Eigen::Vector3d(kps[i][0].get<double>(), kps[i][1].get<double>(),
                            kps[i][2].get<double>());
    model.diameter = require_field(j, "diameter", "object model").get<double>();
    model.symmetric = require_field(j, "symmetric", "object model").get<bool>();
    validate_model(model);
    return model;
}

} // namespace kdpose
