#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcd/mlp.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (s.size() % 4 != 0) throw CheckpointError("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = s[i + j];
            if (c == '=') {
                if (i + 4 != s.size() || j < 2) throw CheckpointError("base64: misplaced padding");
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = val(c);
            if (d < 0 || pad > 0) throw CheckpointError("base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    return out;
}

/// Doubles as little-endian bytes regardless of host order; exact round-trip.
inline std::string encode_f64(const Tensor& t) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(t.size() * 8);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint64_t u = std::bit_cast<std::uint64_t>(t[i]);
        for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>((u >> (8 * b)) & 0xFF));
    }
    return base64_encode(bytes);
}

inline Tensor decode_f64(const std::string& s, Shape shape, const char* what) {
    const std::vector<std::uint8_t> bytes = base64_decode(s);
    const std::size_t n = shape_numel(shape);
    if (bytes.size() != n * 8) {
        throw CheckpointError(std::string("checkpoint: array \"") + what + "\" has " +
                              std::to_string(bytes.size() / 8) + " values, expected " + std::to_string(n));
    }
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        t[i] = std::bit_cast<double>(u);
    }
    return t;
}

}  // namespace detail

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::int64_t iterations = 0;
    std::string config_hash;
};

namespace detail {

inline nlohmann::json checkpoint_json(const Mlp& net, const std::string& role,
                                      const std::vector<Tensor>* sn_u, const std::vector<Tensor>* sn_v,
                                      const CheckpointMeta& meta) {
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["role"] = role;
    std::vector<std::size_t> dims;
    dims.push_back(net.layers.front().w.rows());
    for (const AffineLayer& L : net.layers) dims.push_back(L.w.cols());
    j["dims"] = dims;
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        nlohmann::json jl;
        jl["w"] = encode_f64(net.layers[l].w);
        jl["b"] = encode_f64(net.layers[l].b);
        if (sn_u) {
            jl["u"] = encode_f64((*sn_u)[l]);
            jl["v"] = encode_f64((*sn_v)[l]);
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    j["metadata"] = {{"seed", meta.seed}, {"iterations", meta.iterations}, {"config_hash", meta.config_hash}};
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline nlohmann::json read_checkpoint_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
        throw CheckpointError("checkpoint " + path.string() + " lacks a format_version");
    }
    const int version = j["format_version"].get<int>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint " + path.string() + " has format_version " +
                              std::to_string(version) + ", this build supports " +
                              std::to_string(kCheckpointVersion));
    }
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j, const std::filesystem::path& path) {
    const std::vector<std::size_t> dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() < 2) throw CheckpointError("checkpoint " + path.string() + ": bad dims");
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != dims.size()) {
        throw CheckpointError("checkpoint " + path.string() + ": layer count does not match dims");
    }
    Mlp net;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        AffineLayer L;
        L.w = decode_f64(layers[l].at("w").get<std::string>(), {dims[l], dims[l + 1]}, "w");
        L.b = decode_f64(layers[l].at("b").get<std::string>(), {dims[l + 1]}, "b");
        net.layers.push_back(std::move(L));
    }
    return net;
}

}  // namespace detail

inline void save_generator(const std::filesystem::path& path, const MlpGenerator& gen,
                           const CheckpointMeta& meta) {
    detail::write_text_file(path, detail::checkpoint_json(gen.net, "generator", nullptr, nullptr, meta).dump(2) + "\n");
}

inline void save_critic(const std::filesystem::path& path, const MlpCritic& critic,
                        const CheckpointMeta& meta) {
    detail::write_text_file(
        path, detail::checkpoint_json(critic.net, "critic", &critic.sn_u, &critic.sn_v, meta).dump(2) + "\n");
}

inline MlpGenerator load_generator(const std::filesystem::path& path, CheckpointMeta* meta = nullptr) {
    const nlohmann::json j = detail::read_checkpoint_json(path);
    if (j.at("role").get<std::string>() != "generator") {
        throw CheckpointError("checkpoint " + path.string() + " has role \"" +
                              j.at("role").get<std::string>() + "\", expected generator");
    }
    if (meta) {
        meta->seed = j.at("metadata").at("seed").get<std::uint64_t>();
        meta->iterations = j.at("metadata").at("iterations").get<std::int64_t>();
        meta->config_hash = j.at("metadata").at("config_hash").get<std::string>();
    }
    return MlpGenerator{detail::mlp_from_json(j, path)};
}

inline MlpCritic load_critic(const std::filesystem::path& path, CheckpointMeta* meta = nullptr) {
    const nlohmann::json j = detail::read_checkpoint_json(path);
    if (j.at("role").get<std::string>() != "critic") {
        throw CheckpointError("checkpoint " + path.string() + " has role \"" +
                              j.at("role").get<std::string>() + "\", expected critic");
    }
    MlpCritic critic;
    critic.net = detail::mlp_from_json(j, path);
    const auto& layers = j.at("layers");
    for (std::size_t l = 0; l < critic.net.layers.size(); ++l) {
        if (!layers[l].contains("u") || !layers[l].contains("v")) {
            throw CheckpointError("checkpoint " + path.string() + ": critic layer missing spectral state");
        }
        critic.sn_u.push_back(detail::decode_f64(layers[l]["u"].get<std::string>(),
                                                 {critic.net.layers[l].w.rows()}, "u"));
        critic.sn_v.push_back(detail::decode_f64(layers[l]["v"].get<std::string>(),
                                                 {critic.net.layers[l].w.cols()}, "v"));
    }
    if (meta) {
        meta->seed = j.at("metadata").at("seed").get<std::uint64_t>();
        meta->iterations = j.at("metadata").at("iterations").get<std::int64_t>();
        meta->config_hash = j.at("metadata").at("config_hash").get<std::string>();
    }
    return critic;
}

}  // namespace dcd
