#include <filesystem>

#include "json_util.hpp"
#include "kdpose/network.hpp"
#include "kdpose/ten_io.hpp"

namespace kdpose {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "kdpose-checkpoint-v1";

std::string param_file_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%03zu.ten", index);
    return buf;
}

template <typename T>
const char* dtype_name() {
    return std::is_same_v<T, float> ? "float32" : "float64";
}

} // namespace

template <typename T>
void save_checkpoint(const PoseNet<T>& net, const std::string& dir,
                     const std::string& metadata_json) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorCode::io, "cannot create checkpoint directory " + dir);

    json params = json::array();
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
        const std::string file = param_file_name(i);
        const std::string role = (i % 2 == 0) ? "weight" : "bias";
        params.push_back({{"name", layers[i / 2].name + "." + role}, {"file", file}});
        write_tensor(net.parameters()[i]->value, dir + "/" + file);
    }

    json manifest{{"format", kFormat},
                  {"dtype", dtype_name<T>()},
                  {"spec", network_spec_to_json(net.spec())},
                  {"seed", net.seed()},
                  {"params", params}};
    manifest["metadata"] =
        metadata_json.empty() ? json(nullptr) : parse_json_text(metadata_json, "checkpoint metadata");
    write_json_file(manifest, dir + "/manifest.json");
}

template <typename T>
PoseNet<T> load_checkpoint(const std::string& dir, std::string* metadata_json) {
    const json manifest = parse_json_file(dir + "/manifest.json");
    const std::string format = require_field(manifest, "format", "checkpoint").get<std::string>();
    require(format == kFormat, ErrorCode::incompatible,
            "unsupported checkpoint format: " + format);
    const NetworkSpec spec =
        network_spec_from_json(require_field(manifest, "spec", "checkpoint"));
    const auto seed = require_field(manifest, "seed", "checkpoint").get<std::uint64_t>();

    PoseNet<T> net(spec, seed);
    const auto& params = require_field(manifest, "params", "checkpoint");
    require(params.is_array() && params.size() == net.parameters().size(),
            ErrorCode::incompatible, "checkpoint parameter list does not match the spec");
    std::vector<Tensor<T>> values;
    values.reserve(params.size());
    for (const auto& p : params)
        values.push_back(
            read_tensor<T>(dir + "/" + require_field(p, "file", "checkpoint").get<std::string>()));
    net.set_parameter_values(values);

    if (metadata_json) {
        const auto it = manifest.find("metadata");
        *metadata_json = (it == manifest.end() || it->is_null()) ? "" : it->dump();
    }
    return net;
}

template void save_checkpoint<float>(const PoseNet<float>&, const std::string&,
                                     const std::string&);
template void save_checkpoint<double>(const PoseNet<double>&, const std::string&,
                                      const std::string&);
template PoseNet<float> load_checkpoint<float>(const std::string&, std::string*);
template PoseNet<double> load_checkpoint<double>(const std::string&, std::string*);

} // namespace kdpose
