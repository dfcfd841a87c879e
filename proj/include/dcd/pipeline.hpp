#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dcd/checkpoint.hpp"
#include "dcd/config.hpp"
#include "dcd/dcd.hpp"
#include "dcd/eval.hpp"
#include "dcd/io.hpp"
#include "dcd/sampler.hpp"
#include "dcd/wgan.hpp"

namespace dcd {

namespace fs = std::filesystem;

/// Power iterations run at checkpoint save so stored critics carry a
/// near-exact normalization, vs. the single cheap iteration per training
/// step.
inline constexpr int kCheckpointSnIters = 50;

struct TrainArtifacts {
    fs::path generator_ckpt;
    fs::path critic_ckpt;
    fs::path train_log_csv;
    TrainResult result;
};

inline TrainArtifacts run_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    TrainArtifacts art;
    art.generator_ckpt = out_dir / "generator.json";
    art.critic_ckpt = out_dir / "critic.json";
    art.train_log_csv = out_dir / "train_log.csv";

    art.result = train(cfg.dataset, cfg.train);
    spectral_normalize(art.result.critic, kCheckpointSnIters);

    const CheckpointMeta meta{cfg.seed, cfg.train.iters, cfg.config_hash};
    save_generator(art.generator_ckpt, art.result.generator, meta);
    save_critic(art.critic_ckpt, art.result.critic, meta);
    write_train_log_csv(art.train_log_csv, art.result.log);
    return art;
}

struct FinetuneArtifacts {
    fs::path critic_dcd_ckpt;
    fs::path dcd_log_csv;
    MlpCritic critic;
    DcdLog log;
};

/// Loads both checkpoints, fine-tunes the critic, writes critic_dcd.json.
/// The input files are never touched; with zero iterations the weights pass
/// through unchanged.
inline FinetuneArtifacts run_finetune(const ExperimentConfig& cfg, const fs::path& generator_ckpt,
                                      const fs::path& critic_ckpt, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const MlpGenerator generator = load_generator(generator_ckpt);
    MlpCritic critic = load_critic(critic_ckpt);
    if (generator.net.out_dim() != critic.net.in_dim()) {
        throw CheckpointError("generator output dim " + std::to_string(generator.net.out_dim()) +
                              " does not match critic input dim " + std::to_string(critic.net.in_dim()));
    }

    FinetuneArtifacts art;
    art.critic_dcd_ckpt = out_dir / "critic_dcd.json";
    art.dcd_log_csv = out_dir / "dcd_log.csv";
    if (cfg.dcd.iters > 0) {
        DcdResult res = dcd_finetune(generator, std::move(critic), cfg.dataset, cfg.dcd);
        art.critic = std::move(res.critic);
        art.log = std::move(res.log);
        spectral_normalize(art.critic, kCheckpointSnIters);
    } else {
        art.critic = std::move(critic);
    }
    const CheckpointMeta meta{cfg.seed, cfg.dcd.iters, cfg.config_hash};
    save_critic(art.critic_dcd_ckpt, art.critic, meta);
    write_dcd_log_csv(art.dcd_log_csv, art.log);
    return art;
}

struct SampleArtifacts {
    fs::path samples_csv;
    std::optional<fs::path> trajectory_csv;
    Tensor samples;
};

/// Draw n prior latents, refine them with the configured chain, and write
/// the sample-space results. Pixel chains start from the decoded generator
/// output; latent chains iterate z and decode at the end.
inline SampleArtifacts run_sample(const MlpGenerator& generator, const MlpCritic& critic,
                                  const LangevinConfig& preset, std::size_t n, std::uint64_t seed,
                                  const fs::path& samples_csv,
                                  const std::optional<fs::path>& trajectory_csv = std::nullopt) {
    SampleArtifacts art;
    art.samples_csv = samples_csv;
    art.trajectory_csv = trajectory_csv;
    if (samples_csv.has_parent_path()) fs::create_directories(samples_csv.parent_path());

    if (n == 0) {
        art.samples = Tensor();
        write_samples_csv(samples_csv, art.samples);
        if (trajectory_csv) {
            write_trajectory_csv(*trajectory_csv, ChainState{}, preset.mh_correction);
        }
        return art;
    }

    Rng base(seed);
    Rng rng_z = base.sub(streams::kSampleLatent);
    Rng rng_chain = base.sub(streams::kSampleChain);
    const Tensor z = gaussian(rng_z, {n, 2});

    LangevinConfig cfg = preset;
    cfg.record_every = trajectory_csv ? 1 : 0;
    ChainState chain;
    if (cfg.space == Space::Latent) {
        chain = run_chain(critic, &generator, z, cfg, rng_chain);
    } else {
        chain = run_chain(critic, nullptr, generator.forward(z), cfg, rng_chain);
    }
    art.samples = chain.output;
    write_samples_csv(samples_csv, art.samples);
    if (trajectory_csv) write_trajectory_csv(*trajectory_csv, chain, cfg.mh_correction);
    return art;
}

inline SampleArtifacts run_sample(const fs::path& generator_ckpt, const fs::path& critic_ckpt,
                                  const LangevinConfig& preset, std::size_t n, std::uint64_t seed,
                                  const fs::path& samples_csv,
                                  const std::optional<fs::path>& trajectory_csv = std::nullopt) {
    const MlpGenerator generator = load_generator(generator_ckpt);
    const MlpCritic critic = load_critic(critic_ckpt);
    return run_sample(generator, critic, preset, n, seed, samples_csv, trajectory_csv);
}

inline ModeReport run_evaluate(const MixtureSpec& spec, const fs::path& samples_csv,
                               double hq_sigmas, const fs::path& report_json) {
    const Tensor samples = read_samples_csv(samples_csv);
    const ModeReport report = mode_report(spec, samples, hq_sigmas);
    if (report_json.has_parent_path()) fs::create_directories(report_json.parent_path());
    write_mode_report_json(report_json, report);
    return report;
}

inline LevelGrid run_levelset(const fs::path& critic_ckpt, double x_min, double x_max, double y_min,
                              double y_max, std::size_t res_x, std::size_t res_y,
                              const fs::path& out_csv, const fs::path& out_ppm) {
    const MlpCritic critic = load_critic(critic_ckpt);
    const LevelGrid grid = level_grid(CriticField{&critic}, x_min, x_max, y_min, y_max, res_x, res_y);
    if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
    write_level_grid_csv(out_csv, grid);
    write_level_grid_ppm(out_ppm, grid);
    return grid;
}

}  // namespace dcd
