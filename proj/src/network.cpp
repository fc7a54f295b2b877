#include "kdpose/network.hpp"

#include <cmath>

#include "kdpose/conv.hpp"
#include "kdpose/rng.hpp"

namespace kdpose {

const char* net_role_name(NetRole role) {
    return role == NetRole::teacher ? "teacher" : "student";
}

NetRole net_role_from_name(const std::string& name) {
    if (name == "teacher") return NetRole::teacher;
    if (name == "student") return NetRole::student;
    raise(ErrorCode::parse, "unknown network role: " + name);
}

NetworkSpec NetworkSpec::teacher_default(int classes) {
    NetworkSpec s;
    s.role = NetRole::teacher;
    s.stem_channels1 = 16;
    s.stem_channels2 = 32;
    s.backbone_blocks = 8;
    s.backbone_channels = 64;
    s.classes = classes;
    return s;
}

NetworkSpec NetworkSpec::student_default(int classes) {
    NetworkSpec s;
    s.role = NetRole::student;
    s.stem_channels1 = 16;
    s.stem_channels2 = 32;
    s.backbone_blocks = 4;
    s.backbone_channels = 32;
    s.classes = classes;
    return s;
}

void NetworkSpec::validate() const {
    require(stem_channels1 > 0 && stem_channels2 > 0 && backbone_channels > 0,
            ErrorCode::invalid_argument, "network channel counts must be positive");
    require(backbone_blocks >= 1, ErrorCode::invalid_argument,
            "network needs at least one backbone block");
    require(keypoints == 9, ErrorCode::invalid_argument, "network expects 9 keypoints");
    require(classes >= 1, ErrorCode::invalid_argument, "network needs at least one class");
}

template <typename T>
PoseNet<T>::PoseNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec), seed_(seed) {
    spec_.validate();

    layers_.push_back({"stem0", 3, spec_.stem_channels1, 3, 2, 1, true});
    layers_.push_back({"stem1", spec_.stem_channels1, spec_.stem_channels2, 3, 2, 1, true});
    int cin = spec_.stem_channels2;
    for (int b = 0; b < spec_.backbone_blocks; ++b) {
        layers_.push_back(
            {"backbone" + std::to_string(b), cin, spec_.backbone_channels, 3, 1, 1, true});
        cin = spec_.backbone_channels;
    }
    layers_.push_back({"reg0", cin, spec_.backbone_channels, 1, 1, 0, true});
    layers_.push_back({"reg1", spec_.backbone_channels, spec_.backbone_channels, 1, 1, 0, true});
    layers_.push_back({"head", spec_.backbone_channels, spec_.head_channels(), 1, 1, 0, false});

    Rng rng(seed);
    for (const LayerSpec& l : layers_) {
        Tensor<T> weight({static_cast<std::size_t>(l.cout), static_cast<std::size_t>(l.cin),
                          static_cast<std::size_t>(l.kernel), static_cast<std::size_t>(l.kernel)});
        const double fan_in = static_cast<double>(l.kernel) * l.kernel * l.cin;
        const double bound = std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < weight.numel(); ++i)
            weight[i] = static_cast<T>(rng.uniform(-bound, bound));
        params_.push_back(parameter(std::move(weight)));
        params_.push_back(parameter(Tensor<T>({static_cast<std::size_t>(l.cout)})));
    }
}

namespace {

void check_input_shape(const std::vector<std::size_t>& shape) {
    require(shape.size() == 3 && shape[0] == 3, ErrorCode::dimension_mismatch,
            "network input must be (3, H, W)");
    require(shape[1] % 4 == 0 && shape[2] % 4 == 0, ErrorCode::dimension_mismatch,
            "network input height and width must be divisible by 4");
}

} // namespace

template <typename T>
ForwardNodes<T> PoseNet<T>::forward(const Tensor<T>& image) const {
    check_input_shape(image.shape());
    NodePtr<T> x = constant(image);
    NodePtr<T> backbone_out;
    const std::size_t last_backbone = 1 + static_cast<std::size_t>(spec_.backbone_blocks);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const LayerSpec& l = layers_[li];
        x = conv2d(x, params_[2 * li], params_[2 * li + 1], l.stride, l.padding);
        if (l.relu_after) x = relu(x);
        if (li == last_backbone) backbone_out = x;
    }
    ForwardNodes<T> out;
    const auto split = static_cast<std::size_t>(spec_.map_channels());
    out.maps = slice_channels(x, 0, split);
    out.fields = slice_channels(x, split, static_cast<std::size_t>(spec_.head_channels()));
    out.backbone_features = backbone_out;
    return out;
}

template <typename T>
ForwardTensors<T> PoseNet<T>::forward_raw(const Tensor<T>& image) const {
    check_input_shape(image.shape());
    Tensor<T> x = image;
    Tensor<T> backbone_out;
    const std::size_t last_backbone = 1 + static_cast<std::size_t>(spec_.backbone_blocks);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const LayerSpec& l = layers_[li];
        const ops::ConvDims dims =
            ops::conv_dims(x.shape(), params_[2 * li]->value.shape(),
                           params_[2 * li + 1]->value.shape(), l.stride, l.padding);
        x = ops::conv2d_forward(dims, x, params_[2 * li]->value, params_[2 * li + 1]->value,
                                nullptr);
        if (l.relu_after)
            for (std::size_t i = 0; i < x.numel(); ++i)
                if (x[i] < T(0)) x[i] = T(0);
        if (li == last_backbone) backbone_out = x;
    }
    ForwardTensors<T> out;
    const std::size_t plane = x.dim(1) * x.dim(2);
    const auto split = static_cast<std::size_t>(spec_.map_channels());
    out.maps = Tensor<T>({split, x.dim(1), x.dim(2)});
    std::copy_n(x.data(), split * plane, out.maps.data());
    const std::size_t field_ch = static_cast<std::size_t>(spec_.field_channels());
    out.fields = Tensor<T>({field_ch, x.dim(1), x.dim(2)});
    std::copy_n(x.data() + split * plane, field_ch * plane, out.fields.data());
    out.backbone_features = std::move(backbone_out);
    return out;
}

template <typename T>
std::uint64_t PoseNet<T>::param_count() const {
    std::uint64_t total = 0;
    for (const LayerSpec& l : layers_)
        total += static_cast<std::uint64_t>(l.kernel) * l.kernel * l.cin * l.cout + l.cout;
    return total;
}

template <typename T>
std::uint64_t PoseNet<T>::flop_count(std::size_t height, std::size_t width) const {
    require(height % 4 == 0 && width % 4 == 0, ErrorCode::invalid_argument,
            "flop_count resolution must be divisible by 4");
    std::uint64_t total = 0;
    std::size_t h = height, w = width;
    for (const LayerSpec& l : layers_) {
        const std::size_t oh = (h + 2 * l.padding - l.kernel) / l.stride + 1;
        const std::size_t ow = (w + 2 * l.padding - l.kernel) / l.stride + 1;
        const std::uint64_t macs = static_cast<std::uint64_t>(oh) * ow * l.kernel * l.kernel *
                                   l.cin * l.cout;
        total += 2 * macs + static_cast<std::uint64_t>(oh) * ow * l.cout;
        h = oh;
        w = ow;
    }
    return total;
}

template <typename T>
std::uint64_t PoseNet<T>::checksum() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& p : params_) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        const std::size_t n = p->value.numel() * sizeof(T);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

template <typename T>
void PoseNet<T>::set_parameter_values(const std::vector<Tensor<T>>& values) {
    require(values.size() == params_.size(), ErrorCode::incompatible,
            "parameter count mismatch when loading checkpoint");
    for (std::size_t i = 0; i < values.size(); ++i) {
        require(values[i].same_shape(params_[i]->value), ErrorCode::incompatible,
                "parameter shape mismatch when loading checkpoint");
        params_[i]->value = values[i];
    }
}

template class PoseNet<float>;
template class PoseNet<double>;

} // namespace kdpose
