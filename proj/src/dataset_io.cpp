#include <cstdio>
#include <filesystem>

#include "json_util.hpp"
#include "kdpose/dataset.hpp"
#include "kdpose/ten_io.hpp"

namespace kdpose {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "kdpose-dataset-v1";

std::string sample_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", index);
    return buf;
}

void check_label_consistency(const SceneSample& sample, const std::vector<ObjectModel>& models,
                             const std::string& what) {
    for (const auto& inst : sample.instances) {
        require(inst.class_id >= 0 && inst.class_id < static_cast<int>(models.size()),
                ErrorCode::parse, what + ": instance class_id out of range");
        const ObjectModel& model = models[inst.class_id];
        for (int k = 0; k < 9; ++k) {
            const Eigen::Vector2d reproj =
                project(sample.intrinsics, transform_point(inst.pose, model.keypoints3d[k]));
            require((reproj - inst.keypoints2d[k]).norm() <= 1e-6, ErrorCode::parse,
                    what + ": keypoints2d are inconsistent with the stored pose");
        }
    }
}

} // namespace

std::vector<std::size_t> Dataset::indices_of(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.split.size(); ++i)
        if (manifest.split[i] == split) out.push_back(i);
    return out;
}

void write_dataset(const Dataset& dataset, const std::string& dir) {
    require(dataset.samples.size() == dataset.manifest.split.size(), ErrorCode::invalid_argument,
            "dataset: split tags do not match sample count");
    std::error_code ec;
    fs::create_directories(dir + "/samples", ec);
    if (ec) raise(ErrorCode::io, "cannot create dataset directory " + dir);

    json samples = json::array();
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const SceneSample& s = dataset.samples[i];
        const std::string name = sample_name(i);
        write_tensor(s.image, dir + "/samples/" + name + ".img");
        json instances = json::array();
        for (const auto& inst : s.instances) {
            json kps = json::array();
            for (const auto& kp : inst.keypoints2d) kps.push_back({kp.x(), kp.y()});
            instances.push_back({{"class_id", inst.class_id},
                                 {"pose", pose_to_json(inst.pose)},
                                 {"keypoints2d", kps}});
        }
        write_json_file(json{{"instances", instances}}, dir + "/samples/" + name + ".gt");
        samples.push_back({{"name", name}, {"split", dataset.manifest.split[i]}});
    }

    json models = json::array();
    for (const auto& m : dataset.manifest.models) models.push_back(object_model_to_json(m));
    const json manifest{{"format", kFormat},
                        {"count", dataset.samples.size()},
                        {"width", dataset.manifest.width},
                        {"height", dataset.manifest.height},
                        {"intrinsics", intrinsics_to_json(dataset.manifest.intrinsics)},
                        {"seed", dataset.manifest.seed},
                        {"models", models},
                        {"samples", samples}};
    write_json_file(manifest, dir + "/manifest");
}

Dataset read_dataset(const std::string& dir) {
    const json manifest = parse_json_file(dir + "/manifest");
    require(require_field(manifest, "format", "dataset manifest").get<std::string>() == kFormat,
            ErrorCode::incompatible, "unsupported dataset format");

    Dataset dataset;
    dataset.manifest.width = require_field(manifest, "width", "dataset manifest").get<std::size_t>();
    dataset.manifest.height =
        require_field(manifest, "height", "dataset manifest").get<std::size_t>();
    dataset.manifest.intrinsics =
        intrinsics_from_json(require_field(manifest, "intrinsics", "dataset manifest"));
    dataset.manifest.seed =
        require_field(manifest, "seed", "dataset manifest").get<std::uint64_t>();
    for (const auto& m : require_field(manifest, "models", "dataset manifest"))
        dataset.manifest.models.push_back(object_model_from_json(m));

    const auto count = require_field(manifest, "count", "dataset manifest").get<std::size_t>();
    const auto& samples = require_field(manifest, "samples", "dataset manifest");
    require(samples.is_array() && samples.size() == count, ErrorCode::parse,
            "dataset manifest: sample list does not match the declared count");

    for (const auto& entry : samples) {
        const std::string name = require_field(entry, "name", "dataset manifest").get<std::string>();
        const std::string split =
            require_field(entry, "split", "dataset manifest").get<std::string>();
        require(split == "train" || split == "test", ErrorCode::parse,
                "dataset manifest: unknown split tag '" + split + "'");

        SceneSample sample;
        sample.image = read_tensor<float>(dir + "/samples/" + name + ".img");
        require(sample.image.rank() == 3 && sample.image.dim(0) == 3 &&
                    sample.image.dim(1) == dataset.manifest.height &&
                    sample.image.dim(2) == dataset.manifest.width,
                ErrorCode::parse, "sample " + name + ": image shape mismatch");
        sample.intrinsics = dataset.manifest.intrinsics;

        const json gt = parse_json_file(dir + "/samples/" + name + ".gt");
        for (const auto& ij : require_field(gt, "instances", "sample " + name)) {
            SceneInstance inst;
            inst.class_id = require_field(ij, "class_id", "sample " + name).get<int>();
            inst.pose = pose_from_json(require_field(ij, "pose", "sample " + name));
            const auto& kps = require_field(ij, "keypoints2d", "sample " + name);
            require(kps.is_array() && kps.size() == 9, ErrorCode::parse,
                    "sample " + name + ": keypoints2d must have 9 entries");
            for (int k = 0; k < 9; ++k)
                inst.keypoints2d[k] =
                    Eigen::Vector2d(kps[k][0].get<double>(), kps[k][1].get<double>());
            sample.instances.push_back(inst);
        }
        check_label_consistency(sample, dataset.manifest.models, "sample " + name);
        dataset.samples.push_back(std::move(sample));
        dataset.manifest.split.push_back(split);
    }
    return dataset;
}

Dataset generate_dataset(const std::vector<ObjectModel>& models, std::uint64_t seed,
                         const DatasetGenOptions& options) {
    Dataset dataset;
    dataset.manifest.width = options.scene.width;
    dataset.manifest.height = options.scene.height;
    dataset.manifest.intrinsics = options.scene.intrinsics;
    dataset.manifest.models = models;
    dataset.manifest.seed = seed;

    const std::size_t total = options.train_samples + options.test_samples;
    for (std::size_t i = 0; i < total; ++i) {
        const bool is_train = i < options.train_samples;
        Rng rng(mix_seed(seed, i));
        SceneSample sample = generate_scene(models, rng, options.scene);
        if (is_train && options.cut_paste_fraction > 0 &&
            rng.uniform01() < options.cut_paste_fraction) {
            const SceneSample background = generate_background(rng, options.scene);
            sample = cut_and_paste(sample, background);
        }
        dataset.samples.push_back(std::move(sample));
        dataset.manifest.split.push_back(is_train ? "train" : "test");
    }
    return dataset;
}

} // namespace kdpose
