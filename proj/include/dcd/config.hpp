#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dcd/dcd.hpp"
#include "dcd/mixture.hpp"
#include "dcd/sampler.hpp"
#include "dcd/wgan.hpp"

namespace dcd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PresetDef {
    LangevinConfig cfg;
    bool runnable = true;  // Appendix presets for image scales are recorded but not runnable here
};

/// Built-in Langevin presets. "latent" and "pixel" drive the 2D pipeline;
/// the cifar/stl entries document the image-scale settings and are rejected
/// if selected for sampling.
inline std::map<std::string, PresetDef> builtin_presets() {
    std::map<std::string, PresetDef> presets;
    presets["latent"] = {latent_preset(), true};
    presets["pixel"] = {pixel_preset(), true};
    {
        LangevinConfig raw;
        raw.eps = 0.2;
        raw.steps = 0;  // bypass: raw generator output
        raw.noise_scale = 0.1;
        raw.space = Space::Latent;
        presets["raw"] = {raw, true};
    }
    presets["cifar-latent"] = {latent_preset(), false};
    presets["cifar-pixel"] = {pixel_preset(), false};
    {
        LangevinConfig stl;
        stl.eps = 0.05;
        stl.steps = 150;
        stl.noise_scale = 0.1;
        stl.space = Space::Pixel;
        presets["stl"] = {stl, false};
    }
    return presets;
}

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string dataset_name = "ring8";
    MixtureSpec dataset = ring8();
    double hq_sigmas = 4.0;
    TrainConfig train;
    DcdConfig dcd;
    std::map<std::string, PresetDef> presets = builtin_presets();
    std::string sampling_preset = "latent";  // preset this experiment samples with
    std::string config_hash;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 16);
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& section, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: field \"" + (section.empty() ? key : section + "." + key) +
                          "\" has the wrong type");
    }
}

inline AdamConfig parse_adam(const nlohmann::json& j, const std::string& section, AdamConfig def) {
    AdamConfig cfg = def;
    cfg.lr = get_field<double>(j, section, "lr", cfg.lr);
    cfg.beta1 = get_field<double>(j, section, "beta1", cfg.beta1);
    cfg.beta2 = get_field<double>(j, section, "beta2", cfg.beta2);
    cfg.eps = get_field<double>(j, section, "eps", cfg.eps);
    return cfg;
}

inline Space parse_space(const std::string& s, const std::string& field) {
    if (s == "pixel") return Space::Pixel;
    if (s == "latent") return Space::Latent;
    throw ConfigError("config: field \"" + field + "\" must be \"pixel\" or \"latent\"");
}

inline LangevinConfig parse_chain(const nlohmann::json& j, const std::string& section,
                                  LangevinConfig def) {
    LangevinConfig cfg = def;
    cfg.eps = get_field<double>(j, section, "eps", cfg.eps);
    cfg.steps = get_field<int>(j, section, "steps", cfg.steps);
    if (j.contains("noise")) cfg.noise_scale = get_field<double>(j, section, "noise", cfg.noise());
    if (j.contains("space")) {
        cfg.space = parse_space(get_field<std::string>(j, section, "space", "pixel"), section + ".space");
    }
    cfg.mh_correction = get_field<bool>(j, section, "mh", cfg.mh_correction);
    cfg.record_every = get_field<int>(j, section, "record_every", cfg.record_every);
    return cfg;
}

inline MixtureSpec parse_dataset(const nlohmann::json& j, std::string& name) {
    if (j.is_string()) {
        name = j.get<std::string>();
        if (name == "ring8") return ring8();
        if (name == "grid25") return grid25();
        throw ConfigError("config: field \"dataset\" names unknown preset \"" + name +
                          "\" (ring8|grid25 or an inline spec)");
    }
    if (!j.is_object()) throw ConfigError("config: field \"dataset\" must be a preset name or object");
    name = "custom";
    MixtureSpec spec;
    if (!j.contains("modes") || !j["modes"].is_array() || j["modes"].empty()) {
        throw ConfigError("config: field \"dataset.modes\" must be a non-empty array");
    }
    for (const auto& m : j["modes"]) {
        GaussianMode mode{};
        const auto mean = m.at("mean").get<std::vector<double>>();
        if (mean.size() != 2) throw ConfigError("config: field \"dataset.modes[].mean\" must have 2 entries");
        mode.mean = {mean[0], mean[1]};
        mode.std = m.at("std").get<double>();
        spec.modes.push_back(mode);
    }
    if (j.contains("weights")) {
        spec.weights = j["weights"].get<std::vector<double>>();
    } else {
        spec.weights.assign(spec.modes.size(), 1.0 / static_cast<double>(spec.modes.size()));
    }
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: field \"dataset\": ") + e.what());
    }
    return spec;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [key, _] : j.items()) {
        static const char* known[] = {"seed",  "out_dir", "dataset",          "hq_sigmas",
                                      "train", "dcd",     "langevin_presets", "sampling_preset"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("config: unknown field \"" + key + "\"");
    }
    if (!j.contains("seed")) throw ConfigError("config: missing required field \"seed\"");
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
        throw ConfigError("config: field \"seed\" must be an integer");
    }

    ExperimentConfig cfg;
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.out_dir = detail::get_field<std::string>(j, "", "out_dir", cfg.out_dir);
    if (j.contains("dataset")) cfg.dataset = detail::parse_dataset(j["dataset"], cfg.dataset_name);
    cfg.hq_sigmas = detail::get_field<double>(j, "", "hq_sigmas", cfg.hq_sigmas);
    if (!(cfg.hq_sigmas > 0.0)) throw ConfigError("config: field \"hq_sigmas\" must be > 0");

    if (j.contains("train")) {
        const auto& jt = j["train"];
        cfg.train.batch_size = detail::get_field<int>(jt, "train", "batch_size", cfg.train.batch_size);
        cfg.train.critic_steps = detail::get_field<int>(jt, "train", "critic_steps", cfg.train.critic_steps);
        cfg.train.iters = detail::get_field<int>(jt, "train", "iters", cfg.train.iters);
        cfg.train.hidden = detail::get_field<std::size_t>(jt, "train", "hidden", cfg.train.hidden);
        cfg.train.sn_iters = detail::get_field<int>(jt, "train", "sn_iters", cfg.train.sn_iters);
        if (jt.contains("loss")) {
            try {
                cfg.train.variant = parse_loss_variant(jt["loss"].get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config: field \"train.loss\": ") + e.what());
            }
        }
        if (jt.contains("adam_critic")) cfg.train.adam_critic = detail::parse_adam(jt["adam_critic"], "train.adam_critic", cfg.train.adam_critic);
        if (jt.contains("adam_generator")) cfg.train.adam_generator = detail::parse_adam(jt["adam_generator"], "train.adam_generator", cfg.train.adam_generator);
    }
    if (j.contains("dcd")) {
        const auto& jd = j["dcd"];
        cfg.dcd.iters = detail::get_field<int>(jd, "dcd", "iters", cfg.dcd.iters);
        cfg.dcd.batch = detail::get_field<int>(jd, "dcd", "batch", cfg.dcd.batch);
        cfg.dcd.sn_iters = detail::get_field<int>(jd, "dcd", "sn_iters", cfg.dcd.sn_iters);
        if (jd.contains("adam")) cfg.dcd.adam = detail::parse_adam(jd["adam"], "dcd.adam", cfg.dcd.adam);
        if (jd.contains("chain_preset") && jd.contains("chain")) {
            throw ConfigError("config: give either \"dcd.chain_preset\" or \"dcd.chain\", not both");
        }
        if (jd.contains("chain_preset")) {
            const std::string name = jd["chain_preset"].get<std::string>();
            if (name == "latent") cfg.dcd.chain = latent_preset();
            else if (name == "pixel") cfg.dcd.chain = pixel_preset();
            else throw ConfigError("config: field \"dcd.chain_preset\" must be \"latent\" or \"pixel\"");
        }
        if (jd.contains("chain")) cfg.dcd.chain = detail::parse_chain(jd["chain"], "dcd.chain", cfg.dcd.chain);
    }
    if (j.contains("langevin_presets")) {
        if (!j["langevin_presets"].is_object()) {
            throw ConfigError("config: field \"langevin_presets\" must be an object");
        }
        for (const auto& [name, jp] : j["langevin_presets"].items()) {
            PresetDef def;
            const auto it = cfg.presets.find(name);
            if (it != cfg.presets.end()) def = it->second;
            def.cfg = detail::parse_chain(jp, "langevin_presets." + name, def.cfg);
            if (jp.contains("runnable")) def.runnable = jp["runnable"].get<bool>();
            cfg.presets[name] = def;
        }
    }

    cfg.sampling_preset = detail::get_field<std::string>(j, "", "sampling_preset", cfg.sampling_preset);
    if (cfg.presets.find(cfg.sampling_preset) == cfg.presets.end()) {
        throw ConfigError("config: field \"sampling_preset\" names unknown preset \"" +
                          cfg.sampling_preset + "\"");
    }

    cfg.train.seed = cfg.seed;
    cfg.dcd.seed = cfg.seed;
    try {
        cfg.train.validate();
        cfg.dcd.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.config_hash = detail::fnv1a_hex(j.dump());
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// Look up a sampling preset; documentation-only presets are rejected.
inline LangevinConfig resolve_preset(const ExperimentConfig& cfg, const std::string& name) {
    const auto it = cfg.presets.find(name);
    if (it == cfg.presets.end()) throw ConfigError("unknown langevin preset \"" + name + "\"");
    if (!it->second.runnable) {
        throw ConfigError("langevin preset \"" + name +
                          "\" is recorded for documentation only and cannot run on 2D artifacts");
    }
    return it->second.cfg;
}

}  // namespace dcd
