#pragma once

#include <cstdint>
#include <string>

#include "kdpose/autograd.hpp"

namespace kdpose {

enum class NetRole { teacher, student };

const char* net_role_name(NetRole role);
NetRole net_role_from_name(const std::string& name);

/// Capacity description of the fully-convolutional pose network:
/// stem (two 3x3 stride-2 convs), backbone (3x3 stride-1 convs), regressor
/// (three 1x1 convs, linear head). The head emits K*C belief channels
/// followed by (K-1)*2*C vector-field channels at quarter resolution.
struct NetworkSpec {
    NetRole role = NetRole::student;
    int stem_channels1 = 16;
    int stem_channels2 = 32;
    int backbone_blocks = 4;
    int backbone_channels = 32;
    int keypoints = 9;
    int classes = 1;

    static NetworkSpec teacher_default(int classes = 1);
    static NetworkSpec student_default(int classes = 1);

    int map_channels() const { return keypoints * classes; }
    int field_channels() const { return (keypoints - 1) * 2 * classes; }
    int head_channels() const { return map_channels() + field_channels(); }

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

template <typename T>
struct ForwardNodes {
    NodePtr<T> maps;              // (K*C, H/4, W/4)
    NodePtr<T> fields;            // ((K-1)*2*C, H/4, W/4)
    NodePtr<T> backbone_features; // (backbone_channels, H/4, W/4)
};

template <typename T>
struct ForwardTensors {
    Tensor<T> maps;
    Tensor<T> fields;
    Tensor<T> backbone_features;
};

template <typename T>
class PoseNet {
public:
    struct LayerSpec {
        std::string name;
        int cin, cout, kernel, stride, padding;
        bool relu_after;
    };

    /// Builds the network with He-uniform weights (biases zero) drawn
    /// deterministically from the seed.
    PoseNet(const NetworkSpec& spec, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    /// Parameters in layer order: weight, bias, weight, bias, ...
    const std::vector<NodePtr<T>>& parameters() const { return params_; }

    /// Graph-building forward pass; input is (3, H, W) with H, W % 4 == 0.
    ForwardNodes<T> forward(const Tensor<T>& image) const;

    /// Inference-only forward pass (no graph, no gradients).
    ForwardTensors<T> forward_raw(const Tensor<T>& image) const;

    /// Total parameter count: sum over layers of k^2*Cin*Cout + Cout.
    std::uint64_t param_count() const;

    /// FLOPs at the given input resolution: 2 per multiply-accumulate plus
    /// one add per output element for the bias.
    std::uint64_t flop_count(std::size_t height, std::size_t width) const;

    /// FNV-1a over the raw parameter bytes in order.
    std::uint64_t checksum() const;

    /// Overwrites all parameter values (checkpoint loading); shapes must match.
    void set_parameter_values(const std::vector<Tensor<T>>& values);

private:
    NetworkSpec spec_;
    std::uint64_t seed_ = 0;
    std::vector<LayerSpec> layers_;
    std::vector<NodePtr<T>> params_; // weight/bias pairs per layer
};

/// Writes manifest.json plus one TEN1 file per parameter into `dir`
/// (created if missing). metadata_json, when nonempty, must be a valid JSON
/// document and is embedded verbatim.
template <typename T>
void save_checkpoint(const PoseNet<T>& net, const std::string& dir,
                     const std::string& metadata_json = "");

/// Loads a checkpoint directory; metadata_json (optional out) receives the
/// embedded metadata document.
template <typename T>
PoseNet<T> load_checkpoint(const std::string& dir, std::string* metadata_json = nullptr);

} // namespace kdpose
