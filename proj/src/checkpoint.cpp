#include "rtn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rtn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'T', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

nlohmann::ordered_json config_to_json(const RtnConfig& cfg) {
    nlohmann::ordered_json j;
    j["grid_k"] = cfg.grid_k;
    j["backbone"] = backbone_name(cfg.backbone);
    j["m_keypoints"] = cfg.m_keypoints;
    j["knn_k"] = cfg.knn_k;
    j["global_mlp_widths"] = cfg.global_mlp_widths;
    j["global_fc_width"] = cfg.global_fc_width;
    j["edgeconv_widths"] = cfg.edgeconv_widths;
    j["aggregate_width"] = cfg.aggregate_width;
    j["local_fc_width"] = cfg.local_fc_width;
    j["head_widths"] = cfg.head_widths;
    j["leaky_slope"] = cfg.leaky_slope;
    j["seed"] = cfg.seed;
    j["out_classes"] = cfg.out_classes;
    return j;
}

RtnConfig config_from_json(const nlohmann::json& j) {
    RtnConfig cfg;
    cfg.grid_k = j.at("grid_k").get<int>();
    cfg.backbone = backbone_from_name(j.at("backbone").get<std::string>());
    cfg.m_keypoints = j.at("m_keypoints").get<int>();
    cfg.knn_k = j.at("knn_k").get<int>();
    cfg.global_mlp_widths = j.at("global_mlp_widths").get<std::vector<int>>();
    cfg.global_fc_width = j.at("global_fc_width").get<int>();
    cfg.edgeconv_widths = j.at("edgeconv_widths").get<std::vector<int>>();
    cfg.aggregate_width = j.at("aggregate_width").get<int>();
    cfg.local_fc_width = j.at("local_fc_width").get<int>();
    cfg.head_widths = j.at("head_widths").get<std::vector<int>>();
    cfg.leaky_slope = j.at("leaky_slope").get<float>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.out_classes = j.at("out_classes").get<int>();
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const RtnConfig& cfg,
                     const std::string& path) {
    nlohmann::ordered_json header = config_to_json(cfg);
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    for (size_t i = 0; i < params.names.size(); ++i) {
        table.push_back({params.names[i], params.tensors[i].shape});
    }
    header["tensors"] = table;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Tensor<float>& t : params.tensors) {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::pair<ModelParams<float>, RtnConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header length");
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("load_checkpoint: bad header: ") + e.what());
    }
    RtnConfig cfg = config_from_json(header);

    ModelParams<float> params;
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at(0).get<std::string>();
        Tensor<float> t(entry.at(1).get<std::vector<int>>());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) {
            throw std::runtime_error("load_checkpoint: payload shorter than shape table for '" +
                                     name + "'");
        }
        params.names.push_back(name);
        params.tensors.push_back(std::move(t));
    }
    // declared shapes must match the architecture
    const std::vector<ParamSpec> specs = param_specs(cfg);
    if (specs.size() != params.names.size()) {
        throw std::runtime_error("load_checkpoint: tensor table inconsistent with config");
    }
    for (size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].name != params.names[i] || specs[i].shape != params.tensors[i].shape) {
            throw std::runtime_error("load_checkpoint: tensor table inconsistent with config");
        }
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw std::runtime_error("load_checkpoint: trailing bytes after payload");
    }
    return {std::move(params), cfg};
}

}  // namespace rtn
