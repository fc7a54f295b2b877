#pragma once

#include <array>
#include <optional>

#include "kdpose/geometry.hpp"
#include "kdpose/tensor.hpp"

namespace kdpose {

/// Codec parameters. All coordinates handled here live on the quarter
/// resolution grid; continuous coordinate k is the center of pixel k.
struct CodecConfig {
    int keypoints = 9; // 8 box vertices + centroid
    int classes = 1;
    double sigma = 2.0;            // Gaussian std-dev, quarter-res px
    double vector_radius = 3.0;    // disk radius around each vertex, px
    double peak_threshold = 0.3;   // in (0, 1)
    double angle_threshold_deg = 30.0;

    std::size_t map_channels() const {
        return static_cast<std::size_t>(keypoints) * classes;
    }
    std::size_t field_channels() const {
        return static_cast<std::size_t>(keypoints - 1) * 2 * classes;
    }
    // Belief channel of keypoint k for class c; vector-field channels for
    // vertex j are field_base(c, j) and field_base(c, j) + 1 (dx, dy).
    std::size_t map_channel(int c, int k) const {
        return static_cast<std::size_t>(c) * keypoints + k;
    }
    std::size_t field_base(int c, int j) const {
        return (static_cast<std::size_t>(c) * (keypoints - 1) + j) * 2;
    }
};

/// Ground-truth keypoints of one instance at quarter resolution;
/// index 0..7 are the box vertices, index 8 the centroid.
struct InstanceKeypoints {
    int class_id = 0;
    std::array<Eigen::Vector2d, 9> keypoints{};
};

/// Per-channel Gaussians centered on the keypoints, combined by elementwise
/// max across instances. Off-map keypoints still render their clipped tails.
template <typename T>
Tensor<T> encode_belief_maps(const std::vector<InstanceKeypoints>& instances,
                             const CodecConfig& config, std::size_t height, std::size_t width);

/// Identifies a vertex whose direction to the centroid was undefined.
struct DegenerateVertex {
    int instance_index;
    int vertex_index;
};

/// Unit vectors (vertex - centroid, normalized) on disks of vector_radius
/// around each vertex; the nearer vertex wins where two instances' disks
/// overlap in one channel. Vertices coinciding with the centroid are flagged
/// and their disk left zero.
template <typename T>
Tensor<T> encode_vector_fields(const std::vector<InstanceKeypoints>& instances,
                               const CodecConfig& config, std::size_t height, std::size_t width,
                               std::vector<DegenerateVertex>* degenerate = nullptr);

struct Peak {
    Eigen::Vector2d location; // subpixel, quarter-res
    double confidence = 0;    // raw peak value
};

/// Strict 3x3 local maxima at or above threshold, refined to subpixel by the
/// intensity-weighted centroid of the surrounding 5x5 window (negative values
/// contribute zero weight). Sorted by confidence descending.
template <typename T>
std::vector<Peak> extract_peaks(const Tensor<T>& maps, std::size_t channel, double threshold);

struct VertexDetection {
    Eigen::Vector2d position; // input resolution px
    double confidence = 0;
};

struct InstanceDetection {
    int class_id = 0;
    Eigen::Vector2d centroid2d = Eigen::Vector2d::Zero(); // input resolution px
    double centroid_confidence = 0;
    std::array<std::optional<VertexDetection>, 8> vertices2d{};

    int vertex_count() const {
        int n = 0;
        for (const auto& v : vertices2d)
            if (v) ++n;
        return n;
    }
    // PnP needs six detected vertices; the centroid always comes on top.
    bool pnp_eligible() const { return vertex_count() >= 6; }
};

/// Greedy grouping of one class's peaks into instances: every centroid peak
/// opens an instance; each vertex peak (confidence order) goes to the
/// free-slot instance whose direction best matches the predicted vector,
/// within the angular threshold. Coordinates are rescaled x4 to input
/// resolution.
template <typename T>
std::vector<InstanceDetection> assemble_instances(
    const std::array<std::vector<Peak>, 9>& peaks_per_keypoint, const Tensor<T>& fields,
    int class_id, const CodecConfig& config);

/// extract_peaks + assemble_instances over every class.
template <typename T>
std::vector<InstanceDetection> decode(const Tensor<T>& maps, const Tensor<T>& fields,
                                      const CodecConfig& config);

} // namespace kdpose
