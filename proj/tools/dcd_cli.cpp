// Command-line front end for the 2D energy-refinement pipeline:
//   train     adversarial pre-training on a Gaussian-mixture dataset
//   finetune  contrastive-divergence fine-tuning of the critic
//   sample    Langevin-refined (or raw) generation from the checkpoints
//   evaluate  mode-coverage report for a samples CSV
//   levelset  critic value surface on a lattice (CSV + PPM heatmap)
//
// All randomness comes from the config seed (or --seed); no command reads
// the clock or environment entropy, so reruns are reproducible.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcd/config.hpp"
#include "dcd/pipeline.hpp"

namespace {

struct SeedOverride {
    std::optional<std::uint64_t> value;
};

dcd::ExperimentConfig load_with_seed(const std::string& config_path, const SeedOverride& seed) {
    dcd::ExperimentConfig cfg = dcd::load_config(config_path);
    if (seed.value) {
        cfg.seed = *seed.value;
        cfg.train.seed = *seed.value;
        cfg.dcd.seed = *seed.value;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-based refinement of a spectrally normalized WGAN on 2D Gaussian mixtures"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    SeedOverride seed;

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config (JSON)");
        if (need_config) opt->required();
        cmd->add_option("--seed", seed.value, "override the config seed");
        cmd->add_option("--out", out_dir, "output directory (overrides config out_dir)");
    };

    // train
    auto* cmd_train = app.add_subcommand("train", "pre-train generator and critic");
    add_common(cmd_train, true);

    // finetune
    auto* cmd_finetune = app.add_subcommand("finetune", "fine-tune the critic into an energy function");
    add_common(cmd_finetune, true);
    std::string critic_path, generator_path;
    cmd_finetune->add_option("--critic", critic_path, "pre-trained critic checkpoint")->required();
    cmd_finetune->add_option("--generator", generator_path, "pre-trained generator checkpoint")->required();

    // sample
    auto* cmd_sample = app.add_subcommand("sample", "draw samples via the generator + Langevin chain");
    add_common(cmd_sample, false);
    std::string s_generator, s_critic, preset_name = "latent", samples_out = "samples.csv";
    std::optional<std::string> trajectory_out;
    std::size_t n_samples = 10000;
    cmd_sample->add_option("--generator", s_generator, "generator checkpoint")->required();
    cmd_sample->add_option("--critic", s_critic, "critic checkpoint")->required();
    cmd_sample->add_option("--preset", preset_name, "langevin preset name (latent|pixel|raw|...)");
    cmd_sample->add_option("--n", n_samples, "number of samples");
    cmd_sample->add_option("--samples-out", samples_out, "samples CSV path");
    cmd_sample->add_option("--trajectory-out", trajectory_out, "optional per-step trajectory CSV");

    // evaluate
    auto* cmd_eval = app.add_subcommand("evaluate", "mode-coverage report for a samples CSV");
    add_common(cmd_eval, false);
    std::string e_dataset = "ring8", e_samples, e_report = "mode_report.json";
    double e_hq_sigmas = 4.0;
    cmd_eval->add_option("--dataset", e_dataset, "dataset preset (ring8|grid25); --config overrides");
    cmd_eval->add_option("--samples", e_samples, "samples CSV to score")->required();
    cmd_eval->add_option("--report-out", e_report, "report JSON path");
    cmd_eval->add_option("--hq-sigmas", e_hq_sigmas, "high-quality radius in mode standard deviations");

    // levelset
    auto* cmd_level = app.add_subcommand("levelset", "critic value surface on a lattice");
    add_common(cmd_level, false);
    std::string l_critic, l_csv = "levelset.csv", l_ppm = "levelset.ppm";
    double l_xmin = -4, l_xmax = 4, l_ymin = -4, l_ymax = 4;
    std::size_t l_res = 64;
    cmd_level->add_option("--critic", l_critic, "critic checkpoint")->required();
    cmd_level->add_option("--xmin", l_xmin);
    cmd_level->add_option("--xmax", l_xmax);
    cmd_level->add_option("--ymin", l_ymin);
    cmd_level->add_option("--ymax", l_ymax);
    cmd_level->add_option("--res", l_res, "lattice points per axis");
    cmd_level->add_option("--csv-out", l_csv);
    cmd_level->add_option("--ppm-out", l_ppm);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train->parsed()) {
            const dcd::ExperimentConfig cfg = load_with_seed(config_path, seed);
            const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
            const dcd::TrainArtifacts art = dcd::run_train(cfg, dir);
            std::cout << "wrote " << art.generator_ckpt.string() << "\n"
                      << "wrote " << art.critic_ckpt.string() << "\n"
                      << "wrote " << art.train_log_csv.string() << "\n"
                      << "train wall time: " << art.result.log.wall_seconds << " s\n";
        } else if (cmd_finetune->parsed()) {
            const dcd::ExperimentConfig cfg = load_with_seed(config_path, seed);
            const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
            const dcd::FinetuneArtifacts art = dcd::run_finetune(cfg, generator_path, critic_path, dir);
            std::cout << "wrote " << art.critic_dcd_ckpt.string() << "\n"
                      << "wrote " << art.dcd_log_csv.string() << "\n"
                      << "finetune wall time: " << art.log.wall_seconds << " s\n";
        } else if (cmd_sample->parsed()) {
            dcd::ExperimentConfig cfg;  // built-in presets when no config given
            if (!config_path.empty()) cfg = load_with_seed(config_path, seed);
            else if (seed.value) cfg.seed = *seed.value;
            const dcd::LangevinConfig preset = dcd::resolve_preset(cfg, preset_name);
            std::optional<dcd::fs::path> traj;
            if (trajectory_out) traj = dcd::fs::path(*trajectory_out);
            const dcd::SampleArtifacts art =
                dcd::run_sample(s_generator, s_critic, preset, n_samples, cfg.seed, samples_out, traj);
            std::cout << "wrote " << art.samples_csv.string() << "\n";
            if (art.trajectory_csv) std::cout << "wrote " << art.trajectory_csv->string() << "\n";
        } else if (cmd_eval->parsed()) {
            dcd::MixtureSpec spec;
            double hq = e_hq_sigmas;
            if (!config_path.empty()) {
                const dcd::ExperimentConfig cfg = load_with_seed(config_path, seed);
                spec = cfg.dataset;
                if (cmd_eval->count("--hq-sigmas") == 0) hq = cfg.hq_sigmas;
            } else if (e_dataset == "ring8") {
                spec = dcd::ring8();
            } else if (e_dataset == "grid25") {
                spec = dcd::grid25();
            } else {
                throw dcd::ConfigError("unknown dataset preset \"" + e_dataset + "\" (ring8|grid25)");
            }
            const dcd::ModeReport report = dcd::run_evaluate(spec, e_samples, hq, e_report);
            std::cout << "modes recovered: " << report.modes_recovered << "/" << report.modes_total
                      << "\nhigh-quality fraction: " << report.high_quality_fraction << "\nwrote "
                      << e_report << "\n";
        } else if (cmd_level->parsed()) {
            if (!(l_xmin < l_xmax) || !(l_ymin < l_ymax)) {
                throw dcd::ConfigError("levelset ranges must satisfy min < max");
            }
            dcd::run_levelset(l_critic, l_xmin, l_xmax, l_ymin, l_ymax, l_res, l_res, l_csv, l_ppm);
            std::cout << "wrote " << l_csv << "\nwrote " << l_ppm << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
