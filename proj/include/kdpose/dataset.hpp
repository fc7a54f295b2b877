#pragma once

#include "kdpose/scene.hpp"

namespace kdpose {

struct DatasetManifest {
    std::size_t width = 0, height = 0;
    CameraIntrinsics intrinsics;
    std::vector<ObjectModel> models;
    std::vector<std::string> split; // per-sample tag: "train" or "test"
    std::uint64_t seed = 0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SceneSample> samples;

    std::vector<std::size_t> indices_of(const std::string& split) const;
    std::vector<std::size_t> train_indices() const { return indices_of("train"); }
    std::vector<std::size_t> test_indices() const { return indices_of("test"); }
};

// Directory layout: `manifest` (JSON), `samples/NNNNN.img` (TEN1 float32
// image), `samples/NNNNN.gt` (JSON labels). Round trips are lossless: images
// bit-exact, labels at full double precision.
void write_dataset(const Dataset& dataset, const std::string& dir);
Dataset read_dataset(const std::string& dir);

struct DatasetGenOptions {
    std::size_t train_samples = 500;
    std::size_t test_samples = 200;
    // Fraction of train samples composited onto an independently drawn
    // background; the test split is always plain renders.
    double cut_paste_fraction = 0.5;
    SceneOptions scene;
};

/// Deterministic in (models, seed, options); each sample uses an index-derived
/// sub-seed so generation could be parallelized by index.
Dataset generate_dataset(const std::vector<ObjectModel>& models, std::uint64_t seed,
                         const DatasetGenOptions& options);

} // namespace kdpose
