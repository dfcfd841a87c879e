#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dcd/adam.hpp"
#include "dcd/losses.hpp"
#include "dcd/mixture.hpp"
#include "dcd/mlp.hpp"
#include "dcd/rng.hpp"

namespace dcd {

struct TrainConfig {
    int batch_size = 64;
    int critic_steps = 5;  // critic updates per generator update
    int iters = 10000;     // generator iterations
    std::size_t hidden = 128;
    int sn_iters = 1;  // power iterations per normalization during training
    AdamConfig adam_critic{2e-4, 0.0, 0.9, 1e-8};
    AdamConfig adam_generator{2e-4, 0.0, 0.9, 1e-8};
    LossVariant variant = LossVariant::Hinge;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (critic_steps < 1) throw std::invalid_argument("TrainConfig: critic_steps must be >= 1");
        if (iters < 0) throw std::invalid_argument("TrainConfig: iters must be >= 0");
        if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden must be >= 1");
        if (sn_iters < 1) throw std::invalid_argument("TrainConfig: sn_iters must be >= 1");
    }
};

struct TrainRecord {
    int iter;
    double critic_loss;
    double generator_loss;
};

/// One record per generator iteration. Wall time is kept out of the records
/// so two runs with one seed produce bit-identical logs.
struct TrainLog {
    std::vector<TrainRecord> records;
    double wall_seconds = 0.0;
};

struct TrainingError : std::runtime_error {
    int iter;
    double critic_loss;
    double generator_loss;
    TrainingError(int it, double closs, double gloss)
        : std::runtime_error("training diverged at iteration " + std::to_string(it) +
                             " (critic loss " + std::to_string(closs) + ", generator loss " +
                             std::to_string(gloss) + ")"),
          iter(it),
          critic_loss(closs),
          generator_loss(gloss) {}
};

struct CriticStepStats {
    double loss;
    double mean_d_real;
    double mean_d_neg;
};

namespace detail {

/// d(critic objective)/d(critic outputs) for one batch side. `real` selects
/// the data-batch term. The expressions mirror the tape ops of
/// tape_critic_loss node for node, so the hand-fused update below reproduces
/// the tape path bit for bit.
inline Tensor critic_loss_seed(LossVariant variant, const Tensor& d, bool real) {
    const double inv_m = 1.0 / static_cast<double>(d.size());
    Tensor g(d.shape());
    switch (variant) {
        case LossVariant::Wgan:
            for (std::size_t i = 0; i < d.size(); ++i) g[i] = real ? inv_m : -inv_m;
            break;
        case LossVariant::Hinge:
            // d/dd mean(min(0,-1+d)) = 1[d < 1]/m ; d/dd mean(min(0,-1-d)) = -1[d > -1]/m
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (real) g[i] = (1.0 - d[i] > 0.0) ? inv_m : 0.0;
                else g[i] = (1.0 + d[i] > 0.0) ? -inv_m : 0.0;
            }
            break;
        case LossVariant::Logistic:
            for (std::size_t i = 0; i < d.size(); ++i) {
                g[i] = real ? inv_m * sigmoid(-d[i]) : -inv_m * sigmoid(d[i]);
            }
            break;
    }
    return g;
}

}  // namespace detail

/// One ascent step of the critic objective on a (real, negative) batch pair,
/// followed by spectral normalization. This routine is the critic update for
/// both adversarial pre-training and contrastive-divergence fine-tuning.
inline CriticStepStats critic_ascent_step(MlpCritic& critic, AdamState& adam, const Tensor& x_real,
                                          const Tensor& x_neg, LossVariant variant, int sn_iters) {
    const std::vector<Tensor> acts_real = mlp_forward_acts(critic.net, x_real);
    const std::vector<Tensor> acts_neg = mlp_forward_acts(critic.net, x_neg);
    const Tensor& d_real = acts_real.back();
    const Tensor& d_neg = acts_neg.back();

    MlpGrads grads(critic.net);
    // Negative batch first: shared parameters accumulate contributions in
    // the same order a reverse tape sweep visits them.
    mlp_backward_acts(critic.net, x_neg, acts_neg,
                      detail::critic_loss_seed(variant, d_neg, false), &grads, false);
    mlp_backward_acts(critic.net, x_real, acts_real,
                      detail::critic_loss_seed(variant, d_real, true), &grads, false);

    std::vector<Tensor*> ps;
    std::vector<const Tensor*> gs;
    for (std::size_t l = 0; l < critic.net.layers.size(); ++l) {
        ps.push_back(&critic.net.layers[l].w);
        gs.push_back(&grads.dw[l]);
        ps.push_back(&critic.net.layers[l].b);
        gs.push_back(&grads.db[l]);
    }
    adam.step(ps, gs, Direction::Ascend);
    spectral_normalize(critic, sn_iters);

    CriticStepStats stats;
    stats.loss = critic_loss(variant, d_real, d_neg);
    stats.mean_d_real = detail::mean_of(d_real);
    stats.mean_d_neg = detail::mean_of(d_neg);
    return stats;
}

/// One descent step of the generator against a frozen critic.
inline double generator_descent_step(MlpGenerator& generator, const MlpCritic& critic,
                                     AdamState& adam, const Tensor& z) {
    const std::vector<Tensor> gen_acts = mlp_forward_acts(generator.net, z);
    const Tensor& x = gen_acts.back();
    const std::vector<Tensor> critic_acts = mlp_forward_acts(critic.net, x);
    const Tensor& d = critic_acts.back();

    // loss = -mean(D(G(z))); seed on d is -1/m.
    Tensor seed = Tensor::full(d.shape(), -1.0 / static_cast<double>(d.size()));
    Tensor dx = mlp_backward_acts(critic.net, x, critic_acts, std::move(seed), nullptr, true);
    MlpGrads grads(generator.net);
    mlp_backward_acts(generator.net, z, gen_acts, std::move(dx), &grads, false);

    std::vector<Tensor*> ps;
    std::vector<const Tensor*> gs;
    for (std::size_t l = 0; l < generator.net.layers.size(); ++l) {
        ps.push_back(&generator.net.layers[l].w);
        gs.push_back(&grads.dw[l]);
        ps.push_back(&generator.net.layers[l].b);
        gs.push_back(&grads.db[l]);
    }
    adam.step(ps, gs, Direction::Descend);
    return generator_loss(d);
}

struct TrainResult {
    MlpGenerator generator;
    MlpCritic critic;
    TrainLog log;
};

/// Adversarial pre-training: per generator iteration, `critic_steps` critic
/// ascent steps on fresh batches (normalizing after every update), then one
/// generator descent step. Deterministic given (spec, cfg.seed).
inline TrainResult train(const MixtureSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Rng base(cfg.seed);
    Rng rng_critic_init = base.sub(streams::kTrainCriticInit);
    Rng rng_gen_init = base.sub(streams::kTrainGeneratorInit);
    Rng rng_data = base.sub(streams::kTrainData);
    Rng rng_z_critic = base.sub(streams::kTrainCriticLatent);
    Rng rng_z_gen = base.sub(streams::kTrainGeneratorLatent);

    TrainResult res{MlpGenerator{make_mlp(rng_gen_init, {2, cfg.hidden, cfg.hidden, cfg.hidden, 2})},
                    make_critic(rng_critic_init, cfg.hidden),
                    TrainLog{}};
    spectral_normalize(res.critic, cfg.sn_iters);

    AdamState adam_c(cfg.adam_critic);
    AdamState adam_g(cfg.adam_generator);
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int it = 0; it < cfg.iters; ++it) {
        CriticStepStats stats{0.0, 0.0, 0.0};
        for (int c = 0; c < cfg.critic_steps; ++c) {
            Tensor x_real = sample(spec, rng_data, batch);
            Tensor z = gaussian(rng_z_critic, {batch, 2});
            Tensor x_fake = res.generator.forward(z);
            stats = critic_ascent_step(res.critic, adam_c, x_real, x_fake, cfg.variant,
                                       cfg.sn_iters);
        }
        Tensor z = gaussian(rng_z_gen, {batch, 2});
        const double gloss = generator_descent_step(res.generator, res.critic, adam_g, z);
        if (!std::isfinite(stats.loss) || !std::isfinite(gloss)) {
            throw TrainingError(it, stats.loss, gloss);
        }
        res.log.records.push_back({it, stats.loss, gloss});
    }

    res.log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace dcd
