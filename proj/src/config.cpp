#include "kdpose/config.hpp"

#include "json_util.hpp"

namespace kdpose {

void TrainConfig::validate() const {
    require(lr > 0, ErrorCode::invalid_argument, "lr must be positive");
    require(lr_halve_every > 0, ErrorCode::invalid_argument, "lr_halve_every must be positive");
    require(epochs >= 1, ErrorCode::invalid_argument, "epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be >= 1");
    require(lambda1 >= 0 && lambda2 >= 0, ErrorCode::invalid_argument,
            "lambdas must be nonnegative");
    require(norm_exponent == 1 || norm_exponent == 2, ErrorCode::invalid_argument,
            "norm_exponent must be 1 or 2");
    require(sigma > 0, ErrorCode::invalid_argument, "sigma must be positive");
    require(peak_threshold > 0 && peak_threshold < 1, ErrorCode::invalid_argument,
            "peak_threshold must be in (0, 1)");
    require(train_samples >= 1 && test_samples >= 1, ErrorCode::invalid_argument,
            "sample counts must be >= 1");
    require(width % 4 == 0 && height % 4 == 0 && width > 0 && height > 0,
            ErrorCode::invalid_argument, "resolution must be positive and divisible by 4");
    require(classes >= 1, ErrorCode::invalid_argument, "classes must be >= 1");
    require(fx > 0 && fy > 0, ErrorCode::invalid_argument, "focal lengths must be positive");
    require(min_instances >= 1 && max_instances >= min_instances, ErrorCode::invalid_argument,
            "bad instance bounds");
    require(depth_min > 0 && depth_max >= depth_min, ErrorCode::invalid_argument,
            "bad depth range");
    require(cut_paste_fraction >= 0 && cut_paste_fraction <= 1, ErrorCode::invalid_argument,
            "cut_paste_fraction must be in [0, 1]");
    teacher.validate();
    student.validate();
}

CodecConfig TrainConfig::codec_config() const {
    CodecConfig c;
    c.classes = classes;
    c.sigma = sigma;
    c.vector_radius = vector_radius;
    c.peak_threshold = peak_threshold;
    c.angle_threshold_deg = angle_threshold_deg;
    return c;
}

SceneOptions TrainConfig::scene_options() const {
    SceneOptions o;
    o.width = static_cast<std::size_t>(width);
    o.height = static_cast<std::size_t>(height);
    o.intrinsics = {fx, fy, cx, cy};
    o.min_instances = min_instances;
    o.max_instances = max_instances;
    o.depth_min = depth_min;
    o.depth_max = depth_max;
    o.codec = codec_config();
    return o;
}

DatasetGenOptions TrainConfig::dataset_options() const {
    DatasetGenOptions o;
    o.train_samples = static_cast<std::size_t>(train_samples);
    o.test_samples = static_cast<std::size_t>(test_samples);
    o.cut_paste_fraction = cut_paste_fraction;
    o.scene = scene_options();
    return o;
}

AugmentConfig TrainConfig::augment_config() const {
    AugmentConfig a;
    a.blur_prob = blur_prob;
    a.jitter = jitter;
    a.max_rotation_deg = max_rotation_deg;
    return a;
}

DistillConfig TrainConfig::distill_config() const {
    return {lambda1, lambda2, norm_exponent};
}

NetworkSpec TrainConfig::teacher_spec() const {
    NetworkSpec s = teacher;
    s.classes = classes;
    return s;
}

NetworkSpec TrainConfig::student_spec() const {
    NetworkSpec s = student;
    s.classes = classes;
    return s;
}

namespace {

json config_to_json(const TrainConfig& c) {
    return json{{"lr", c.lr},
                {"lr_halve_every", c.lr_halve_every},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"lambda1", c.lambda1},
                {"lambda2", c.lambda2},
                {"norm_exponent", c.norm_exponent},
                {"seed", c.seed},
                {"sigma", c.sigma},
                {"peak_threshold", c.peak_threshold},
                {"angle_threshold_deg", c.angle_threshold_deg},
                {"vector_radius", c.vector_radius},
                {"train_samples", c.train_samples},
                {"test_samples", c.test_samples},
                {"width", c.width},
                {"height", c.height},
                {"classes", c.classes},
                {"fx", c.fx},
                {"fy", c.fy},
                {"cx", c.cx},
                {"cy", c.cy},
                {"min_instances", c.min_instances},
                {"max_instances", c.max_instances},
                {"depth_min", c.depth_min},
                {"depth_max", c.depth_max},
                {"cut_paste_fraction", c.cut_paste_fraction},
                {"augment", c.augment},
                {"blur_prob", c.blur_prob},
                {"jitter", c.jitter},
                {"max_rotation_deg", c.max_rotation_deg},
                {"teacher", network_spec_to_json(c.teacher)},
                {"student", network_spec_to_json(c.student)},
                {"eval_subset", c.eval_subset}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c; // missing keys keep their defaults
    const auto get = [&](const char* key, auto& field) {
        const auto it = j.find(key);
        if (it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
    };
    get("lr", c.lr);
    get("lr_halve_every", c.lr_halve_every);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lambda1", c.lambda1);
    get("lambda2", c.lambda2);
    get("norm_exponent", c.norm_exponent);
    get("seed", c.seed);
    get("sigma", c.sigma);
    get("peak_threshold", c.peak_threshold);
    get("angle_threshold_deg", c.angle_threshold_deg);
    get("vector_radius", c.vector_radius);
    get("train_samples", c.train_samples);
    get("test_samples", c.test_samples);
    get("width", c.width);
    get("height", c.height);
    get("classes", c.classes);
    get("fx", c.fx);
    get("fy", c.fy);
    get("cx", c.cx);
    get("cy", c.cy);
    get("min_instances", c.min_instances);
    get("max_instances", c.max_instances);
    get("depth_min", c.depth_min);
    get("depth_max", c.depth_max);
    get("cut_paste_fraction", c.cut_paste_fraction);
    get("augment", c.augment);
    get("blur_prob", c.blur_prob);
    get("jitter", c.jitter);
    get("max_rotation_deg", c.max_rotation_deg);
    if (j.contains("teacher")) c.teacher = network_spec_from_json(j["teacher"]);
    if (j.contains("student")) c.student = network_spec_from_json(j["student"]);
    get("eval_subset", c.eval_subset);
    c.validate();
    return c;
}

} // namespace

std::string TrainConfig::to_json_string() const { return config_to_json(*this).dump(2); }

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    return config_from_json(parse_json_text(text, "config"));
}

std::string TrainConfig::fingerprint() const {
    const std::string canonical = config_to_json(*this).dump();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const char ch : canonical) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TrainConfig load_config(const std::string& path) {
    return config_from_json(parse_json_file(path));
}

void save_config(const TrainConfig& config, const std::string& path) {
    write_json_file(config_to_json(config), path);
}

void config_set_field(TrainConfig& config, const std::string& key, const std::string& value) {
    json j = config_to_json(config);
    require(j.contains(key), ErrorCode::invalid_argument, "unknown config key: " + key);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value; // plain string
    }
    j[key] = parsed;
    try {
        config = config_from_json(j);
    } catch (const json::exception& e) {
        raise(ErrorCode::invalid_argument,
              "bad value for config key '" + key + "': " + e.what());
    }
}

std::string config_get_field(const TrainConfig& config, const std::string& key) {
    const json j = config_to_json(config);
    require(j.contains(key), ErrorCode::invalid_argument, "unknown config key: " + key);
    return j.at(key).dump();
}

} // namespace kdpose
