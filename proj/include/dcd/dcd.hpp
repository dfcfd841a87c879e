#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dcd/sampler.hpp"
#include "dcd/wgan.hpp"

namespace dcd {

struct DcdConfig {
    int iters = 1000;  // outer iterations T
    int batch = 64;    // m
    LangevinConfig chain = latent_preset();
    AdamConfig adam{2e-5, 0.0, 0.9, 1e-8};  // critic lr reduced 10x from pre-training
    int sn_iters = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (iters < 0) throw std::invalid_argument("DcdConfig: iters must be >= 0");
        if (batch < 1) throw std::invalid_argument("DcdConfig: batch must be >= 1");
        if (sn_iters < 1) throw std::invalid_argument("DcdConfig: sn_iters must be >= 1");
        chain.validate();
    }
};

struct DcdRecord {
    int iter;
    double objective;
    double mean_d_real;
    double mean_d_chain;
    double acceptance_rate;  // negative when the chain ran without MH
};

struct DcdLog {
    std::vector<DcdRecord> records;
    double wall_seconds = 0.0;
};

struct DcdResult {
    MlpCritic critic;
    DcdLog log;
};

/// Contrastive objective of one fine-tune iteration:
/// mean(D(data)) - mean(D(chain negatives)).
inline double dcd_objective(const Tensor& d_real, const Tensor& d_chain) {
    if (d_real.size() != d_chain.size() || d_real.empty()) {
        throw std::invalid_argument("dcd_objective: batches must be non-empty and equal-sized");
    }
    return detail::mean_of(d_real) - detail::mean_of(d_chain);
}

/// Fine-tune a pre-trained critic by contrastive divergence: per iteration,
/// draw data samples and fresh prior latents, refresh negatives with the
/// inner Langevin chain (pixel: refine G(z); latent: refine z, then decode),
/// and ascend mean(D(data)) - mean(D(negatives)) with Adam, normalizing after
/// every update. The generator stays frozen; with K = 0 each iteration is
/// exactly one plain WGAN critic step on raw generator negatives.
inline DcdResult dcd_finetune(const MlpGenerator& generator, MlpCritic critic,
                              const MixtureSpec& spec, const DcdConfig& cfg) {
    cfg.validate();
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();

    Rng base(cfg.seed);
    Rng rng_data = base.sub(streams::kDcdData);
    Rng rng_z = base.sub(streams::kDcdLatent);
    Rng rng_chain = base.sub(streams::kDcdChain);

    AdamState adam(cfg.adam);
    DcdLog log;
    const std::size_t m = static_cast<std::size_t>(cfg.batch);

    for (int t = 0; t < cfg.iters; ++t) {
        Tensor x_real = sample(spec, rng_data, m);
        Tensor z = gaussian(rng_z, {m, 2});
        ChainState chain;
        if (cfg.chain.space == Space::Latent) {
            chain = run_chain(critic, &generator, z, cfg.chain, rng_chain);
        } else {
            Tensor x0 = generator.forward(z);
            chain = run_chain(critic, nullptr, x0, cfg.chain, rng_chain);
        }
        const CriticStepStats stats =
            critic_ascent_step(critic, adam, x_real, chain.output, LossVariant::Wgan, cfg.sn_iters);
        if (!std::isfinite(stats.loss)) {
            throw TrainingError(t, stats.loss, 0.0);
        }
        const double acc = chain.proposals > 0
                               ? static_cast<double>(chain.accepted) / static_cast<double>(chain.proposals)
                               : -1.0;
        log.records.push_back({t, stats.loss, stats.mean_d_real, stats.mean_d_neg, acc});
    }

    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return DcdResult{std::move(critic), std::move(log)};
}

}  // namespace dcd
