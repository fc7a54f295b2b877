#pragma once

#include <cstdint>
#include <optional>

#include "kdpose/codec.hpp"
#include "kdpose/geometry.hpp"
#include "kdpose/tensor.hpp"

namespace kdpose {

struct SceneInstance {
    int class_id = 0;
    Pose pose;
    std::array<Eigen::Vector2d, 9> keypoints2d{}; // input-resolution pixels
};

struct SceneSample {
    Tensor<float> image; // (3, H, W), values in [0, 1]
    std::vector<SceneInstance> instances;
    CameraIntrinsics intrinsics;
    // Render mask, H*W entries: 0 background, i+1 for instance i. Kept in
    // memory for compositing; not part of the on-disk layout.
    std::vector<std::uint8_t> mask;

    std::size_t height() const { return image.dim(1); }
    std::size_t width() const { return image.dim(2); }
};

struct SceneOptions {
    std::size_t width = 128, height = 128;
    CameraIntrinsics intrinsics{140.0, 140.0, 64.0, 64.0};
    int min_instances = 1, max_instances = 2;
    double depth_min = 600.0, depth_max = 1200.0; // mm
    double frame_margin_px = 8.0;                 // keypoints stay this far inside
    double min_centroid_separation_px = 40.0;     // between instances
    int max_attempts = 100;
    // Reject scenes whose encoded labels do not decode back within 0.5
    // quarter-res px; keeps every emitted sample usable downstream.
    bool verify_decodable = true;
    CodecConfig codec;
    std::optional<Pose> forced_pose; // single instance with exactly this pose
};

/// Renders cuboid instances with exact pose and keypoint labels over a
/// procedural background. Throws a frustum error after max_attempts
/// consecutive rejections.
SceneSample generate_scene(const std::vector<ObjectModel>& models, Rng& rng,
                           const SceneOptions& options);

/// Background-only sample (no instances); used as the canvas for
/// cut-and-paste compositing.
SceneSample generate_background(Rng& rng, const SceneOptions& options);

/// Copies the foreground's rendered object pixels onto the background
/// sample's image; labels come from the foreground unchanged.
SceneSample cut_and_paste(const SceneSample& foreground, const SceneSample& background);

struct AugmentConfig {
    double blur_prob = 0.5;       // chance of a 3x3 box blur
    double jitter = 0.2;          // per-channel gain in [1-jitter, 1+jitter]
    double max_rotation_deg = 30; // in-plane rotation about the principal point
};

/// Online augmentation. The in-plane rotation maps to a camera-frame Rz, the
/// pose is updated accordingly and keypoints are re-projected from the
/// updated pose, so labels stay exactly consistent (assumes fx == fy).
/// Returns nullopt when rotated keypoints leave the frame (resample signal).
std::optional<SceneSample> augment(const SceneSample& sample,
                                   const std::vector<ObjectModel>& models, Rng& rng,
                                   const AugmentConfig& config);

/// Cuboid object whose 8 box vertices are its own corners: dims are the full
/// side lengths (mm); model points sample the surface.
ObjectModel make_cuboid_model(int class_id, const std::string& name,
                              const Eigen::Vector3d& dims, bool symmetric);

/// Distinct per-class cuboids; class 1 (when present) has a square
/// cross-section and is flagged symmetric.
std::vector<ObjectModel> default_models(int classes);

/// Quarter-resolution ground-truth keypoints of every instance.
std::vector<InstanceKeypoints> quarter_keypoints(const SceneSample& sample);

} // namespace kdpose
