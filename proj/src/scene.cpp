#include "kdpose/scene.hpp"

#include <algorithm>
#include <cmath>

namespace kdpose {

namespace {

// Corner index bit layout: bit0 -> +x, bit1 -> +y, bit2 -> +z.
Eigen::Vector3d cuboid_corner(const Eigen::Vector3d& half, int index) {
    return {(index & 1) ? half.x() : -half.x(), (index & 2) ? half.y() : -half.y(),
            (index & 4) ? half.z() : -half.z()};
}

struct FaceSpec {
    std::array<int, 4> corners; // quad loop
    Eigen::Vector3d normal;
};

const std::array<FaceSpec, 6>& cuboid_faces() {
    static const std::array<FaceSpec, 6> faces = {{
        {{1, 3, 7, 5}, {1, 0, 0}},
        {{0, 4, 6, 2}, {-1, 0, 0}},
        {{2, 6, 7, 3}, {0, 1, 0}},
        {{0, 1, 5, 4}, {0, -1, 0}},
        {{4, 5, 7, 6}, {0, 0, 1}},
        {{0, 2, 3, 1}, {0, 0, -1}},
    }};
    return faces;
}

Eigen::Vector3d hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h / 60.0, 6.0);
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

/// Six well-separated face colors per class, rotated in hue by class id.
Eigen::Vector3d face_color(int class_id, int face) {
    const double hue = std::fmod(face * 60.0 + class_id * 25.0, 360.0);
    return hsv_to_rgb(hue, 0.75, 0.9);
}

void paint_background(Tensor<float>& image, Rng& rng) {
    const std::size_t h = image.dim(1), w = image.dim(2);
    const auto kind = rng.uniform_int(0, 2);
    if (kind == 0) { // per-pixel noise
        for (std::size_t i = 0; i < image.numel(); ++i)
            image[i] = static_cast<float>(rng.uniform01());
    } else if (kind == 1) { // linear two-color gradient
        Eigen::Vector3d a, b;
        for (int c = 0; c < 3; ++c) a[c] = rng.uniform01();
        for (int c = 0; c < 3; ++c) b[c] = rng.uniform01();
        const double theta = rng.uniform(0, 2 * M_PI);
        const double dx = std::cos(theta), dy = std::sin(theta);
        const double span = std::abs(dx) * (w - 1) + std::abs(dy) * (h - 1);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double s = (dx * static_cast<double>(x) + dy * static_cast<double>(y)) / span;
                s = std::clamp(0.5 + s, 0.0, 1.0);
                for (int c = 0; c < 3; ++c)
                    image.at3(c, y, x) = static_cast<float>((1 - s) * a[c] + s * b[c]);
            }
        }
    } else { // checkerboard
        Eigen::Vector3d a, b;
        for (int c = 0; c < 3; ++c) a[c] = rng.uniform01();
        for (int c = 0; c < 3; ++c) b[c] = rng.uniform01();
        const auto cell = static_cast<std::size_t>(rng.uniform_int(8, 32));
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const bool odd = ((x / cell) + (y / cell)) % 2 == 1;
                const Eigen::Vector3d& col = odd ? b : a;
                for (int c = 0; c < 3; ++c) image.at3(c, y, x) = static_cast<float>(col[c]);
            }
    }
}

struct RenderFace {
    std::array<Eigen::Vector2d, 4> px;
    double depth;             // mean camera z, for painter's ordering
    Eigen::Vector3d color;    // already shaded
    std::uint8_t mask_value;
};

void rasterize_triangle(Tensor<float>& image, std::vector<std::uint8_t>& mask,
                        const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, const Eigen::Vector3d& color,
                        std::uint8_t mask_value) {
    const std::size_t h = image.dim(1), w = image.dim(2);
    const double area = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(area) < 1e-12) return;
    const double inv_area = 1.0 / area;
    const auto x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(
                                                    std::floor(std::min({a.x(), b.x(), c.x()}))));
    const auto x1 = std::min<std::ptrdiff_t>(w - 1, static_cast<std::ptrdiff_t>(std::ceil(
                                                        std::max({a.x(), b.x(), c.x()}))));
    const auto y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(
                                                    std::floor(std::min({a.y(), b.y(), c.y()}))));
    const auto y1 = std::min<std::ptrdiff_t>(h - 1, static_cast<std::ptrdiff_t>(std::ceil(
                                                        std::max({a.y(), b.y(), c.y()}))));
    for (std::ptrdiff_t y = y0; y <= y1; ++y) {
        for (std::ptrdiff_t x = x0; x <= x1; ++x) {
            const Eigen::Vector2d p(static_cast<double>(x), static_cast<double>(y));
            const double w0 = ((b.x() - p.x()) * (c.y() - p.y()) -
                               (b.y() - p.y()) * (c.x() - p.x())) * inv_area;
            const double w1 = ((c.x() - p.x()) * (a.y() - p.y()) -
                               (c.y() - p.y()) * (a.x() - p.x())) * inv_area;
            const double w2 = 1.0 - w0 - w1;
            if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9) continue;
            for (int ch = 0; ch < 3; ++ch)
                image.at3(ch, y, x) = static_cast<float>(color[ch]);
            mask[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = mask_value;
        }
    }
}

void render_instances(SceneSample& sample, const std::vector<ObjectModel>& models) {
    const Eigen::Vector3d light = Eigen::Vector3d(-0.25, -0.4, -0.88).normalized();
    std::vector<RenderFace> faces;
    for (std::size_t ii = 0; ii < sample.instances.size(); ++ii) {
        const SceneInstance& inst = sample.instances[ii];
        const ObjectModel& model = models[inst.class_id];
        std::array<Eigen::Vector3d, 8> cam;
        std::array<Eigen::Vector2d, 8> px;
        for (int v = 0; v < 8; ++v) {
            cam[v] = transform_point(inst.pose, model.keypoints3d[v]);
            px[v] = project(sample.intrinsics, cam[v]);
        }
        for (int f = 0; f < 6; ++f) {
            const FaceSpec& spec = cuboid_faces()[f];
            RenderFace rf;
            rf.depth = 0;
            for (int v = 0; v < 4; ++v) {
                rf.px[v] = px[spec.corners[v]];
                rf.depth += cam[spec.corners[v]].z();
            }
            rf.depth /= 4;
            const Eigen::Vector3d n_cam = inst.pose.rotation * spec.normal;
            const double shade = 0.35 + 0.65 * std::max(0.0, n_cam.dot(light));
            rf.color = shade * face_color(inst.class_id, f);
            rf.mask_value = static_cast<std::uint8_t>(ii + 1);
            faces.push_back(rf);
        }
    }
    // Painter's algorithm: far faces first.
    std::stable_sort(faces.begin(), faces.end(),
                     [](const RenderFace& a, const RenderFace& b) { return a.depth > b.depth; });
    for (const RenderFace& f : faces) {
        rasterize_triangle(sample.image, sample.mask, f.px[0], f.px[1], f.px[2], f.color,
                           f.mask_value);
        rasterize_triangle(sample.image, sample.mask, f.px[0], f.px[2], f.px[3], f.color,
                           f.mask_value);
    }
}

bool keypoints_inside_frame(const std::array<Eigen::Vector2d, 9>& kps, double margin,
                            std::size_t width, std::size_t height) {
    for (const auto& kp : kps) {
        if (kp.x() < margin || kp.x() > static_cast<double>(width - 1) - margin) return false;
        if (kp.y() < margin || kp.y() > static_cast<double>(height - 1) - margin) return false;
    }
    return true;
}

std::array<Eigen::Vector2d, 9> project_keypoints(const ObjectModel& model, const Pose& pose,
                                                 const CameraIntrinsics& intrinsics) {
    std::array<Eigen::Vector2d, 9> out;
    for (int k = 0; k < 9; ++k)
        out[k] = project(intrinsics, transform_point(pose, model.keypoints3d[k]));
    return out;
}

/// All instances decode back from their own encoded labels (0.5 px quarter
/// resolution, all 8 vertices and the centroid present and matched).
bool labels_decodable(const SceneSample& sample, const CodecConfig& codec) {
    const auto gt = quarter_keypoints(sample);
    const std::size_t qh = sample.height() / 4, qw = sample.width() / 4;
    const TensorF maps = encode_belief_maps<float>(gt, codec, qh, qw);
    const TensorF fields = encode_vector_fields<float>(gt, codec, qh, qw);
    const auto detections = decode(maps, fields, codec);
    if (detections.size() != sample.instances.size()) return false;

    std::vector<bool> used(detections.size(), false);
    for (const auto& inst_kp : gt) {
        int found = -1;
        for (std::size_t d = 0; d < detections.size(); ++d) {
            if (used[d] || detections[d].class_id != inst_kp.class_id) continue;
            if ((detections[d].centroid2d / 4.0 - inst_kp.keypoints[8]).norm() > 0.5) continue;
            bool vertices_ok = detections[d].vertex_count() == 8;
            for (int v = 0; v < 8 && vertices_ok; ++v)
                vertices_ok = detections[d].vertices2d[v] &&
                              (detections[d].vertices2d[v]->position / 4.0 -
                               inst_kp.keypoints[v]).norm() <= 0.5;
            if (vertices_ok) {
                found = static_cast<int>(d);
                break;
            }
        }
        if (found < 0) return false;
        used[found] = true;
    }
    return true;
}

} // namespace

std::vector<InstanceKeypoints> quarter_keypoints(const SceneSample& sample) {
    std::vector<InstanceKeypoints> out;
    out.reserve(sample.instances.size());
    for (const auto& inst : sample.instances) {
        InstanceKeypoints kp;
        kp.class_id = inst.class_id;
        for (int k = 0; k < 9; ++k) kp.keypoints[k] = inst.keypoints2d[k] / 4.0;
        out.push_back(kp);
    }
    return out;
}

SceneSample generate_background(Rng& rng, const SceneOptions& options) {
    SceneSample sample;
    sample.image = Tensor<float>({3, options.height, options.width});
    sample.intrinsics = options.intrinsics;
    sample.mask.assign(options.height * options.width, 0);
    paint_background(sample.image, rng);
    return sample;
}

SceneSample generate_scene(const std::vector<ObjectModel>& models, Rng& rng,
                           const SceneOptions& options) {
    require(!models.empty(), ErrorCode::invalid_argument, "generate_scene needs >= 1 model");
    require(options.min_instances >= 1 && options.max_instances >= options.min_instances,
            ErrorCode::invalid_argument, "bad instance count bounds");
    validate_intrinsics(options.intrinsics);

    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        const int want = options.forced_pose
                             ? 1
                             : static_cast<int>(rng.uniform_int(options.min_instances,
                                                                options.max_instances));
        std::vector<SceneInstance> placed;
        bool scene_ok = true;
        for (int i = 0; i < want && scene_ok; ++i) {
            bool inst_ok = false;
            for (int tries = 0; tries < 20 && !inst_ok; ++tries) {
                SceneInstance inst;
                inst.class_id =
                    static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(models.size()) - 1));
                const ObjectModel& model = models[inst.class_id];
                if (options.forced_pose) {
                    inst.pose = *options.forced_pose;
                } else {
                    inst.pose.rotation = random_rotation(rng);
                    const double depth = rng.uniform(options.depth_min, options.depth_max);
                    // Land the projected centroid uniformly inside the frame.
                    const double margin = options.frame_margin_px;
                    const double px = rng.uniform(margin, options.width - 1 - margin);
                    const double py = rng.uniform(margin, options.height - 1 - margin);
                    inst.pose.translation =
                        Eigen::Vector3d((px - options.intrinsics.cx) * depth / options.intrinsics.fx,
                                        (py - options.intrinsics.cy) * depth / options.intrinsics.fy,
                                        depth);
                }
                inst.keypoints2d = project_keypoints(model, inst.pose, options.intrinsics);
                if (!keypoints_inside_frame(inst.keypoints2d, options.frame_margin_px,
                                            options.width, options.height))
                    continue;
                bool separated = true;
                for (const auto& other : placed)
                    if ((inst.keypoints2d[8] - other.keypoints2d[8]).norm() <
                        options.min_centroid_separation_px) {
                        separated = false;
                        break;
                    }
                if (!separated) continue;
                placed.push_back(inst);
                inst_ok = true;
            }
            scene_ok = inst_ok;
        }
        if (!scene_ok) continue;

        SceneSample sample;
        sample.image = Tensor<float>({3, options.height, options.width});
        sample.intrinsics = options.intrinsics;
        sample.mask.assign(options.height * options.width, 0);
        sample.instances = std::move(placed);
        if (options.verify_decodable) {
            CodecConfig codec = options.codec;
            codec.classes = std::max<int>(codec.classes, static_cast<int>(models.size()));
            if (!labels_decodable(sample, codec)) continue;
        }
        paint_background(sample.image, rng);
        render_instances(sample, models);
        return sample;
    }
    raise(ErrorCode::degenerate_geometry,
          "generate_scene: no scene satisfied the frustum and decodability constraints after " +
              std::to_string(options.max_attempts) + " attempts");
}

SceneSample cut_and_paste(const SceneSample& foreground, const SceneSample& background) {
    require(foreground.image.same_shape(background.image), ErrorCode::dimension_mismatch,
            "cut_and_paste: resolution mismatch");
    require(foreground.mask.size() == foreground.width() * foreground.height(),
            ErrorCode::invalid_argument, "cut_and_paste: foreground lacks a render mask");
    SceneSample out = background;
    out.instances = foreground.instances;
    out.intrinsics = foreground.intrinsics;
    out.mask = foreground.mask;
    const std::size_t plane = foreground.width() * foreground.height();
    for (std::size_t p = 0; p < plane; ++p) {
        if (foreground.mask[p] == 0) continue;
        for (int c = 0; c < 3; ++c)
            out.image[c * plane + p] = foreground.image[c * plane + p];
    }
    return out;
}

namespace {

void box_blur_3x3(Tensor<float>& image) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(image.dim(1));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(image.dim(2));
    Tensor<float> src = image;
    for (int c = 0; c < 3; ++c) {
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0;
                for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
                    for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                        const auto sy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
                        const auto sx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
                        acc += src.at3(c, sy, sx);
                    }
                image.at3(c, y, x) = static_cast<float>(acc / 9.0);
            }
        }
    }
}

float bilinear_sample(const Tensor<float>& image, int channel, double x, double y) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(image.dim(1));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(image.dim(2));
    if (x < 0 || y < 0 || x > w - 1 || y > h - 1) return 0.0f; // outside: black
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(x));
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(y));
    const auto x1 = std::min(x0 + 1, w - 1);
    const auto y1 = std::min(y0 + 1, h - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double v00 = image.at3(channel, y0, x0);
    const double v01 = image.at3(channel, y0, x1);
    const double v10 = image.at3(channel, y1, x0);
    const double v11 = image.at3(channel, y1, x1);
    return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                              fy * ((1 - fx) * v10 + fx * v11));
}

} // namespace

std::optional<SceneSample> augment(const SceneSample& sample,
                                   const std::vector<ObjectModel>& models, Rng& rng,
                                   const AugmentConfig& config) {
    // Draw order is fixed: rotation angle, blur coin, three jitter gains.
    const double theta_deg =
        config.max_rotation_deg > 0
            ? rng.uniform(-config.max_rotation_deg, config.max_rotation_deg)
            : 0.0;
    const bool apply_blur = config.blur_prob > 0 && rng.uniform01() < config.blur_prob;
    double gain[3] = {1.0, 1.0, 1.0};
    if (config.jitter > 0)
        for (double& g : gain) g = rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);

    SceneSample out = sample;
    if (theta_deg != 0.0) {
        const double theta = theta_deg * M_PI / 180.0;
        const Eigen::Matrix3d rz = rotation_about_z(theta);
        for (auto& inst : out.instances) {
            require(inst.class_id >= 0 &&
                        inst.class_id < static_cast<int>(models.size()),
                    ErrorCode::invalid_argument, "augment: instance class has no model");
            inst.pose.rotation = rz * inst.pose.rotation;
            inst.pose.translation = rz * inst.pose.translation;
            inst.keypoints2d =
                project_keypoints(models[inst.class_id], inst.pose, out.intrinsics);
            if (!keypoints_inside_frame(inst.keypoints2d, 0.0, out.width(), out.height()))
                return std::nullopt; // resample signal
        }
        // Resample the image with the matching in-plane rotation about the
        // principal point (inverse mapping, bilinear).
        const double c = std::cos(-theta), s = std::sin(-theta);
        Tensor<float> rotated({3, out.height(), out.width()});
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                const double dx = static_cast<double>(x) - out.intrinsics.cx;
                const double dy = static_cast<double>(y) - out.intrinsics.cy;
                const double sx = c * dx - s * dy + out.intrinsics.cx;
                const double sy = s * dx + c * dy + out.intrinsics.cy;
                for (int ch = 0; ch < 3; ++ch)
                    rotated.at3(ch, y, x) = bilinear_sample(out.image, ch, sx, sy);
            }
        }
        out.image = std::move(rotated);
        out.mask.clear(); // mask is no longer valid after resampling
    }
    if (apply_blur) box_blur_3x3(out.image);
    if (config.jitter > 0) {
        const std::size_t plane = out.width() * out.height();
        for (int ch = 0; ch < 3; ++ch) {
            const float g = static_cast<float>(gain[ch]);
            float* data = out.image.data() + ch * plane;
            for (std::size_t i = 0; i < plane; ++i)
                data[i] = std::clamp(data[i] * g, 0.0f, 1.0f);
        }
    }
    return out;
}

ObjectModel make_cuboid_model(int class_id, const std::string& name,
                              const Eigen::Vector3d& dims, bool symmetric) {
    require(dims.minCoeff() > 0, ErrorCode::invalid_argument, "cuboid dims must be positive");
    ObjectModel model;
    model.name = name;
    model.class_id = class_id;
    model.symmetric = symmetric;
    const Eigen::Vector3d half = dims / 2.0;
    for (int v = 0; v < 8; ++v) model.keypoints3d[v] = cuboid_corner(half, v);
    model.keypoints3d[8] = Eigen::Vector3d::Zero();

    // Surface points: a 5x5 lattice per face (corners included).
    constexpr int kGrid = 5;
    for (const FaceSpec& face : cuboid_faces()) {
        const Eigen::Vector3d origin = cuboid_corner(half, face.corners[0]);
        const Eigen::Vector3d eu = cuboid_corner(half, face.corners[1]) - origin;
        const Eigen::Vector3d ev = cuboid_corner(half, face.corners[3]) - origin;
        for (int a = 0; a < kGrid; ++a)
            for (int b = 0; b < kGrid; ++b)
                model.points.push_back(origin + eu * (a / double(kGrid - 1)) +
                                       ev * (b / double(kGrid - 1)));
    }
    model.diameter = max_pairwise_distance(model.points);
    validate_model(model);
    return model;
}

std::vector<ObjectModel> default_models(int classes) {
    require(classes >= 1, ErrorCode::invalid_argument, "need at least one class");
    std::vector<ObjectModel> models;
    for (int c = 0; c < classes; ++c) {
        // Distinct dimensions per class; every second class beyond the first
        // gets a square cross-section and the symmetric flag.
        const bool symmetric = (c % 2 == 1);
        const double scale = 1.0 + 0.12 * (c / 2);
        const Eigen::Vector3d dims =
            symmetric ? scale * Eigen::Vector3d(180, 180, 260)
                      : scale * Eigen::Vector3d(160, 220, 280);
        models.push_back(
            make_cuboid_model(c, "box_" + std::to_string(c), dims, symmetric));
    }
    return models;
}

} // namespace kdpose
