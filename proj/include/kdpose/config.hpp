#pragma once

#include "kdpose/codec.hpp"
#include "kdpose/dataset.hpp"
#include "kdpose/losses.hpp"
#include "kdpose/network.hpp"

namespace kdpose {

/// Every knob of the pipeline in one serializable record; embedded verbatim
/// into checkpoints and reports.
struct TrainConfig {
    // optimization
    double lr = 1e-4;
    int lr_halve_every = 20; // epochs
    int epochs = 60;
    int batch_size = 8;
    double lambda1 = 0.5;
    double lambda2 = 0.00005;
    int norm_exponent = 1;
    std::uint64_t seed = 1;

    // keypoint codec
    double sigma = 2.0;
    double peak_threshold = 0.3;
    double angle_threshold_deg = 30.0;
    double vector_radius = 3.0;

    // dataset generation
    int train_samples = 500;
    int test_samples = 200;
    int width = 128, height = 128;
    int classes = 1;
    double fx = 140, fy = 140, cx = 64, cy = 64;
    int min_instances = 1, max_instances = 2;
    double depth_min = 600, depth_max = 1200;
    double cut_paste_fraction = 0.5;

    // online augmentation
    bool augment = true;
    double blur_prob = 0.5;
    double jitter = 0.2;
    double max_rotation_deg = 30;

    // networks (their `classes` field follows this config's classes)
    NetworkSpec teacher = NetworkSpec::teacher_default();
    NetworkSpec student = NetworkSpec::student_default();

    // evaluation logging
    int eval_subset = 50; // per-epoch test keypoint-error subset

    void validate() const;

    CodecConfig codec_config() const;
    SceneOptions scene_options() const;
    DatasetGenOptions dataset_options() const;
    AugmentConfig augment_config() const;
    DistillConfig distill_config() const;
    NetworkSpec teacher_spec() const; // with classes applied
    NetworkSpec student_spec() const;

    /// Canonical JSON document of every field.
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);

    /// FNV-1a hash of the canonical JSON, as 16 hex digits.
    std::string fingerprint() const;
};

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& config, const std::string& path);

/// Generic field access for the C API: value is parsed as a JSON literal
/// (numbers, booleans) or taken as a string. Unknown keys raise.
void config_set_field(TrainConfig& config, const std::string& key, const std::string& value);
std::string config_get_field(const TrainConfig& config, const std::string& key);

} // namespace kdpose
