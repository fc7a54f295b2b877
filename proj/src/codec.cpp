#include "kdpose/codec.hpp"

#include <algorithm>
#include <cmath>

namespace kdpose {

namespace {

void check_codec_config(const CodecConfig& config) {
    require(config.keypoints == 9, ErrorCode::invalid_argument, "codec expects 9 keypoints");
    require(config.classes >= 1, ErrorCode::invalid_argument, "codec needs >= 1 class");
    require(config.sigma > 0, ErrorCode::invalid_argument, "sigma must be positive");
    require(config.peak_threshold > 0 && config.peak_threshold < 1, ErrorCode::invalid_argument,
            "peak threshold must be in (0, 1)");
}

} // namespace

template <typename T>
Tensor<T> encode_belief_maps(const std::vector<InstanceKeypoints>& instances,
                             const CodecConfig& config, std::size_t height, std::size_t width) {
    check_codec_config(config);
    Tensor<T> maps({config.map_channels(), height, width});
    const double inv_two_sigma_sq = 1.0 / (2.0 * config.sigma * config.sigma);
    std::vector<double> col_factor(width), row_factor(height);
    for (const auto& inst : instances) {
        require(inst.class_id >= 0 && inst.class_id < config.classes, ErrorCode::invalid_argument,
                "instance class_id out of range");
        for (int k = 0; k < config.keypoints; ++k) {
            const Eigen::Vector2d& kp = inst.keypoints[k];
            // Separable Gaussian evaluated at every pixel center.
            for (std::size_t x = 0; x < width; ++x) {
                const double dx = static_cast<double>(x) - kp.x();
                col_factor[x] = std::exp(-dx * dx * inv_two_sigma_sq);
            }
            for (std::size_t y = 0; y < height; ++y) {
                const double dy = static_cast<double>(y) - kp.y();
                row_factor[y] = std::exp(-dy * dy * inv_two_sigma_sq);
            }
            const std::size_t channel = config.map_channel(inst.class_id, k);
            for (std::size_t y = 0; y < height; ++y) {
                T* row = &maps.at3(channel, y, 0);
                const double ry = row_factor[y];
                for (std::size_t x = 0; x < width; ++x) {
                    const T v = static_cast<T>(ry * col_factor[x]);
                    if (v > row[x]) row[x] = v; // overlapping instances combine by max
                }
            }
        }
    }
    return maps;
}

template <typename T>
Tensor<T> encode_vector_fields(const std::vector<InstanceKeypoints>& instances,
                               const CodecConfig& config, std::size_t height, std::size_t width,
                               std::vector<DegenerateVertex>* degenerate) {
    check_codec_config(config);
    Tensor<T> fields({config.field_channels(), height, width});
    // Distance of the owning vertex per (channel pair, pixel); nearer wins.
    std::vector<double> owner_dist(config.field_channels() / 2 * height * width,
                                   std::numeric_limits<double>::infinity());
    const double radius = config.vector_radius;

    for (std::size_t ii = 0; ii < instances.size(); ++ii) {
        const auto& inst = instances[ii];
        require(inst.class_id >= 0 && inst.class_id < config.classes, ErrorCode::invalid_argument,
                "instance class_id out of range");
        const Eigen::Vector2d& centroid = inst.keypoints[8];
        for (int j = 0; j < config.keypoints - 1; ++j) {
            const Eigen::Vector2d& vertex = inst.keypoints[j];
            const Eigen::Vector2d dir = vertex - centroid;
            const double norm = dir.norm();
            if (norm < 1e-9) {
                if (degenerate)
                    degenerate->push_back({static_cast<int>(ii), j});
                continue; // channel stays zero for this vertex
            }
            const Eigen::Vector2d unit = dir / norm;
            const std::size_t base = config.field_base(inst.class_id, j);
            const std::size_t pair_index = base / 2;

            const auto y0 = static_cast<std::ptrdiff_t>(std::ceil(vertex.y() - radius));
            const auto y1 = static_cast<std::ptrdiff_t>(std::floor(vertex.y() + radius));
            const auto x0 = static_cast<std::ptrdiff_t>(std::ceil(vertex.x() - radius));
            const auto x1 = static_cast<std::ptrdiff_t>(std::floor(vertex.x() + radius));
            for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, y0);
                 y <= std::min<std::ptrdiff_t>(height - 1, y1); ++y) {
                for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, x0);
                     x <= std::min<std::ptrdiff_t>(width - 1, x1); ++x) {
                    const double dx = static_cast<double>(x) - vertex.x();
                    const double dy = static_cast<double>(y) - vertex.y();
                    const double dist = std::sqrt(dx * dx + dy * dy);
                    if (dist > radius) continue;
                    double& owner = owner_dist[(pair_index * height + y) * width + x];
                    if (dist >= owner) continue;
                    owner = dist;
                    fields.at3(base, y, x) = static_cast<T>(unit.x());
                    fields.at3(base + 1, y, x) = static_cast<T>(unit.y());
                }
            }
        }
    }
    return fields;
}

template <typename T>
std::vector<Peak> extract_peaks(const Tensor<T>& maps, std::size_t channel, double threshold) {
    require(maps.rank() == 3, ErrorCode::dimension_mismatch, "extract_peaks expects rank-3 maps");
    require(channel < maps.dim(0), ErrorCode::invalid_argument, "channel out of range");
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(maps.dim(1));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(maps.dim(2));

    std::vector<Peak> peaks;
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            const T v = maps.at3(channel, y, x);
            if (static_cast<double>(v) < threshold) continue;
            bool strict_max = true;
            for (std::ptrdiff_t dy = -1; dy <= 1 && strict_max; ++dy) {
                for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const std::ptrdiff_t ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    if (maps.at3(channel, ny, nx) >= v) {
                        strict_max = false;
                        break;
                    }
                }
            }
            if (!strict_max) continue;

            // Subpixel refinement: intensity-weighted centroid of the 5x5
            // window, clipped at the borders.
            double wsum = 0, xsum = 0, ysum = 0;
            for (std::ptrdiff_t ny = std::max<std::ptrdiff_t>(0, y - 2);
                 ny <= std::min(h - 1, y + 2); ++ny) {
                for (std::ptrdiff_t nx = std::max<std::ptrdiff_t>(0, x - 2);
                     nx <= std::min(w - 1, x + 2); ++nx) {
                    const double weight =
                        std::max(0.0, static_cast<double>(maps.at3(channel, ny, nx)));
                    wsum += weight;
                    xsum += weight * static_cast<double>(nx);
                    ysum += weight * static_cast<double>(ny);
                }
            }
            Peak p;
            p.confidence = static_cast<double>(v);
            p.location = wsum > 0 ? Eigen::Vector2d(xsum / wsum, ysum / wsum)
                                  : Eigen::Vector2d(static_cast<double>(x),
                                                    static_cast<double>(y));
            peaks.push_back(p);
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.confidence > b.confidence; });
    return peaks;
}

namespace {

double angle_between_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const double denom = a.norm() * b.norm();
    if (denom < 1e-12) return 180.0;
    const double c = std::min(1.0, std::max(-1.0, a.dot(b) / denom));
    return std::acos(c) * 180.0 / M_PI;
}

} // namespace

template <typename T>
std::vector<InstanceDetection> assemble_instances(
    const std::array<std::vector<Peak>, 9>& peaks_per_keypoint, const Tensor<T>& fields,
    int class_id, const CodecConfig& config) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(fields.dim(1));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(fields.dim(2));

    std::vector<InstanceDetection> instances;
    std::vector<Eigen::Vector2d> centroids; // quarter-res, parallel to instances
    for (const Peak& cp : peaks_per_keypoint[8]) {
        InstanceDetection det;
        det.class_id = class_id;
        det.centroid2d = 4.0 * cp.location; // back to input resolution
        det.centroid_confidence = cp.confidence;
        instances.push_back(det);
        centroids.push_back(cp.location);
    }
    if (instances.empty()) return instances;

    for (int j = 0; j < config.keypoints - 1; ++j) {
        const std::size_t base = config.field_base(class_id, j);
        for (const Peak& peak : peaks_per_keypoint[j]) { // confidence order
            const auto px = static_cast<std::ptrdiff_t>(std::lround(peak.location.x()));
            const auto py = static_cast<std::ptrdiff_t>(std::lround(peak.location.y()));
            const std::ptrdiff_t cx = std::clamp<std::ptrdiff_t>(px, 0, w - 1);
            const std::ptrdiff_t cy = std::clamp<std::ptrdiff_t>(py, 0, h - 1);
            const Eigen::Vector2d predicted(static_cast<double>(fields.at3(base, cy, cx)),
                                            static_cast<double>(fields.at3(base + 1, cy, cx)));
            if (predicted.norm() < 1e-6) continue; // no direction information

            // Best free-slot instance by angular agreement with the
            // centroid->vertex convention of the encoding.
            int best = -1;
            double best_angle = config.angle_threshold_deg;
            for (std::size_t i = 0; i < instances.size(); ++i) {
                if (instances[i].vertices2d[j]) continue; // higher confidence won already
                const Eigen::Vector2d expected = peak.location - centroids[i];
                const double angle = angle_between_deg(predicted, expected);
                if (angle <= best_angle) {
                    best_angle = angle;
                    best = static_cast<int>(i);
                }
            }
            if (best >= 0)
                instances[best].vertices2d[j] =
                    VertexDetection{4.0 * peak.location, peak.confidence};
        }
    }
    return instances;
}

template <typename T>
std::vector<InstanceDetection> decode(const Tensor<T>& maps, const Tensor<T>& fields,
                                      const CodecConfig& config) {
    check_codec_config(config);
    require(maps.rank() == 3 && fields.rank() == 3, ErrorCode::dimension_mismatch,
            "decode expects rank-3 maps and fields");
    require(maps.dim(0) == config.map_channels(), ErrorCode::dimension_mismatch,
            "belief map channel count does not match (K, C)");
    require(fields.dim(0) == config.field_channels(), ErrorCode::dimension_mismatch,
            "vector field channel count does not match (K, C)");
    require(maps.dim(1) == fields.dim(1) && maps.dim(2) == fields.dim(2),
            ErrorCode::dimension_mismatch, "maps and fields disagree on spatial size");

    std::vector<InstanceDetection> all;
    for (int c = 0; c < config.classes; ++c) {
        std::array<std::vector<Peak>, 9> peaks;
        for (int k = 0; k < config.keypoints; ++k)
            peaks[k] = extract_peaks(maps, config.map_channel(c, k), config.peak_threshold);
        auto dets = assemble_instances(peaks, fields, c, config);
        all.insert(all.end(), dets.begin(), dets.end());
    }
    return all;
}

#define KDPOSE_INSTANTIATE_CODEC(T)                                                          \
    template Tensor<T> encode_belief_maps<T>(const std::vector<InstanceKeypoints>&,          \
                                             const CodecConfig&, std::size_t, std::size_t);  \
    template Tensor<T> encode_vector_fields<T>(const std::vector<InstanceKeypoints>&,        \
                                               const CodecConfig&, std::size_t, std::size_t, \
                                               std::vector<DegenerateVertex>*);              \
    template std::vector<Peak> extract_peaks<T>(const Tensor<T>&, std::size_t, double);      \
    template std::vector<InstanceDetection> assemble_instances<T>(                           \
        const std::array<std::vector<Peak>, 9>&, const Tensor<T>&, int, const CodecConfig&); \
    template std::vector<InstanceDetection> decode<T>(const Tensor<T>&, const Tensor<T>&,    \
                                                      const CodecConfig&);

KDPOSE_INSTANTIATE_CODEC(float)
KDPOSE_INSTANTIATE_CODEC(double)

} // namespace kdpose
