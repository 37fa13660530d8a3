#pragma once

#include <cstring>
#include <string>

#include "breakdown/common.hpp"
#include "breakdown/model.hpp"

#include <nlohmann/json.hpp>

namespace breakdown {

inline constexpr char kCheckpointMagic[8] = {'B', 'R', 'K', 'D', 'N', 'L', 'A', 'B'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32(const std::string& s, size_t off) {
    return static_cast<uint32_t>(static_cast<unsigned char>(s[off])) |
           (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 1])) << 8) |
           (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 2])) << 16) |
           (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 3])) << 24);
}

inline void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(const std::string& s, size_t off) {
    const uint32_t bits = get_u32(s, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

/// Serializes config and parameters: magic, format version, config JSON,
/// then all tensors as float32 little-endian in a fixed traversal order.
template <typename T>
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams<T>& params) {
    if (!params.all_finite())
        throw std::runtime_error("checkpoint: refusing to save non-finite parameters");
    std::string out;
    out.append(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    const std::string cfg_json = nlohmann::json(cfg).dump();
    detail::put_u32(out, static_cast<uint32_t>(cfg_json.size()));
    out += cfg_json;
    params.for_each_tensor([&](const std::string&, const auto& t) {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Mat<T>>) {
            for (const T& v : t.a) detail::put_f32(out, static_cast<float>(v));
        } else {
            for (const T& v : t) detail::put_f32(out, static_cast<float>(v));
        }
    });
    write_file(path, out);
}

/// Loads a checkpoint written by save_checkpoint. The byte count must match
/// the config's shapes exactly; mismatches and corruption are input errors.
inline ModelParams<float> load_checkpoint(const std::string& path, ModelConfig& cfg_out) {
    const std::string s = read_file(path);
    if (s.size() < 16 || std::memcmp(s.data(), kCheckpointMagic, 8) != 0)
        throw input_error("checkpoint " + path + ": bad magic (not a model checkpoint)");
    const uint32_t version = detail::get_u32(s, 8);
    if (version != kCheckpointVersion)
        throw input_error("checkpoint " + path + ": unsupported format version " +
                          std::to_string(version));
    const uint32_t json_len = detail::get_u32(s, 12);
    if (s.size() < 16 + static_cast<size_t>(json_len))
        throw input_error("checkpoint " + path + ": truncated config block");
    ModelConfig cfg;
    try {
        cfg = nlohmann::json::parse(s.substr(16, json_len)).get<ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw input_error("checkpoint " + path + ": invalid config block: " + e.what());
    }
    cfg.require_valid();

    ModelParams<float> params = make_param_shapes<float>(cfg);
    size_t off = 16 + json_len;
    params.for_each_tensor([&](const std::string& name, auto& t) {
        auto read_into = [&](float* dst, size_t n) {
            if (off + 4 * n > s.size())
                throw input_error("checkpoint " + path + ": truncated tensor " + name);
            for (size_t i = 0; i < n; ++i, off += 4) dst[i] = detail::get_f32(s, off);
        };
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Mat<float>>) {
            read_into(t.a.data(), t.a.size());
        } else {
            read_into(t.data(), t.size());
        }
    });
    if (off != s.size())
        throw input_error("checkpoint " + path + ": " + std::to_string(s.size() - off) +
                          " trailing bytes after tensors");
    if (!params.all_finite())
        throw input_error("checkpoint " + path + ": non-finite parameter values");
    cfg_out = cfg;
    return params;
}

inline ModelParams<float> load_checkpoint(const std::string& path) {
    ModelConfig cfg;
    return load_checkpoint(path, cfg);
}

}  // namespace breakdown
