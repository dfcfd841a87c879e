#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcd/fields.hpp"
#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

enum class Space { Pixel, Latent };

inline const char* to_string(Space s) { return s == Space::Pixel ? "pixel" : "latent"; }

struct LangevinConfig {
    double eps = 0.2;
    int steps = 50;
    std::optional<double> noise_scale;  // defaults to 1 (untempered dynamics)
    Space space = Space::Pixel;
    bool mh_correction = false;
    int record_every = 0;  // 0: keep only the final state

    double noise() const { return noise_scale.value_or(1.0); }

    void validate() const {
        if (!(eps > 0.0)) throw std::invalid_argument("LangevinConfig: eps must be > 0");
        if (steps < 0) throw std::invalid_argument("LangevinConfig: steps must be >= 0");
        if (noise_scale && !(*noise_scale > 0.0)) {
            throw std::invalid_argument("LangevinConfig: noise_scale must be > 0 when given");
        }
        if (record_every < 0) throw std::invalid_argument("LangevinConfig: record_every must be >= 0");
    }
};

/// Appendix-style presets adopted for the 2D experiments.
inline LangevinConfig latent_preset() {
    LangevinConfig cfg;
    cfg.eps = 0.2;
    cfg.steps = 50;
    cfg.noise_scale = 0.1;
    cfg.space = Space::Latent;
    return cfg;
}

inline LangevinConfig pixel_preset() {
    LangevinConfig cfg;
    cfg.eps = 10.0;
    cfg.steps = 7;
    cfg.noise_scale = 0.01;
    cfg.space = Space::Pixel;
    return cfg;
}

/// One MCMC trajectory over a batch of independent rows.
struct ChainState {
    Tensor output;                    // [batch, 2] sample-space result
    std::vector<int> recorded_steps;  // step indices of the snapshots below
    std::vector<Tensor> positions;    // sample-space positions per snapshot
    std::vector<Tensor> values;       // critic values per snapshot
    // Per-snapshot, per-row flag: was the transition into this state an
    // accepted MH proposal. Present only for recorded MH chains; the step-0
    // snapshot carries zeros (no proposal yet).
    std::vector<std::vector<std::uint8_t>> accept_flags;
    std::int64_t accepted = 0;  // MH only
    std::int64_t proposals = 0;
    std::uint64_t rng_stream = 0;
};

/// Raised when a chain update leaves the finite range; carries the last
/// finite state so callers can inspect where it blew up.
struct ChainDivergedError : std::runtime_error {
    Tensor last_state;
    explicit ChainDivergedError(Tensor last)
        : std::runtime_error("langevin chain produced non-finite state"), last_state(std::move(last)) {}
};

/// x' = x + (eps/2) * grad D(x) + noise_scale * sqrt(eps) * w,  w ~ N(0, I).
/// Ascends D: the refined density is proportional to exp(D).
template <ScalarField F>
Tensor langevin_step(const F& field, const Tensor& x, double eps, Rng& rng,
                     double noise_scale = 1.0) {
    if (!(eps > 0.0)) throw std::invalid_argument("langevin_step: eps must be > 0");
    const Tensor g = field.grad(x);
    const Tensor w = gaussian(rng, x.shape());
    Tensor out = x;
    const double root_eps = std::sqrt(eps);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += 0.5 * eps * g[i] + noise_scale * root_eps * w[i];
    }
    if (!out.all_finite()) throw ChainDivergedError(x);
    return out;
}

namespace detail {

/// log q(a | b) up to the shared normalizer, for the Langevin proposal
/// q(a|b) propto exp(-|a - b - (eps/2) grad D(b)|^2 / (2 noise^2 eps)).
/// noise = 1 is the plain proposal of the MALA step; chains running with a
/// noise override use the matching density so the correction stays exact
/// (for the correspondingly tempered target exp(D / noise^2)).
inline double langevin_log_q_row(const double* a, const double* b, const double* grad_b,
                                 std::size_t d, double eps, double noise = 1.0) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double r = a[j] - b[j] - 0.5 * eps * grad_b[j];
        s += r * r;
    }
    return -s / (2.0 * noise * noise * eps);
}

}  // namespace detail

namespace detail {

inline Tensor mala_log_accept_rows(const Tensor& x, const FieldEval& cur, const Tensor& prop,
                                   const FieldEval& next, double eps, double noise = 1.0) {
    const std::size_t batch = x.rows(), d = x.cols();
    const double inv_temp = 1.0 / (noise * noise);
    Tensor out({batch});
    for (std::size_t i = 0; i < batch; ++i) {
        out[i] = inv_temp * (next.value[i] - cur.value[i]) +
                 langevin_log_q_row(x.data() + i * d, prop.data() + i * d,
                                    next.grad.data() + i * d, d, eps, noise) -
                 langevin_log_q_row(prop.data() + i * d, x.data() + i * d,
                                    cur.grad.data() + i * d, d, eps, noise);
    }
    return out;
}

}  // namespace detail

/// Per-row log acceptance ratio for a proposed move:
///   log [ exp(D(x')) q(x|x') ] / [ exp(D(x)) q(x'|x) ].
template <ScalarField F>
Tensor mala_log_accept_ratio(const F& field, const Tensor& x, const Tensor& prop, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("mala_log_accept_ratio: eps must be > 0");
    if (!x.same_shape(prop)) throw std::invalid_argument("mala_log_accept_ratio: shape mismatch");
    const FieldEval cur = field_eval(field, x);
    const FieldEval next = field_eval(field, prop);
    return detail::mala_log_accept_rows(x, cur, prop, next, eps);
}

struct MalaStepResult {
    Tensor x;                            // [batch, d]
    std::vector<std::uint8_t> accepted;  // per row
};

/// Langevin proposal plus Metropolis-Hastings correction with the density
/// read as exp(D). Each row is its own chain; rejected rows keep their state.
template <ScalarField F>
MalaStepResult mala_step(const F& field, const Tensor& x, double eps, Rng& rng) {
    if (!(eps > 0.0)) throw std::invalid_argument("mala_step: eps must be > 0");
    const std::size_t batch = x.rows(), d = x.cols();
    const FieldEval cur = field_eval(field, x);
    const Tensor w = gaussian(rng, x.shape());
    Tensor prop = x;
    const double root_eps = std::sqrt(eps);
    for (std::size_t i = 0; i < prop.size(); ++i) {
        prop[i] += 0.5 * eps * cur.grad[i] + root_eps * w[i];
    }
    if (!prop.all_finite()) throw ChainDivergedError(x);
    const FieldEval next = field_eval(field, prop);
    const Tensor log_alpha = detail::mala_log_accept_rows(x, cur, prop, next, eps);

    Tensor u({batch});
    for (std::size_t i = 0; i < batch; ++i) u[i] = rng.uniform01();

    MalaStepResult res{x, std::vector<std::uint8_t>(batch, 0)};
    for (std::size_t i = 0; i < batch; ++i) {
        if (std::log(std::max(u[i], 1e-300)) < std::min(0.0, log_alpha[i])) {
            res.accepted[i] = 1;
            for (std::size_t j = 0; j < d; ++j) res.x[i * d + j] = prop[i * d + j];
        }
    }
    return res;
}

namespace detail {

template <ScalarField F>
ChainState run_chain_impl(const F& field, Tensor state, const LangevinConfig& cfg, Rng& rng) {
    cfg.validate();
    ChainState chain;
    chain.rng_stream = rng.stream();
    const bool record = cfg.record_every > 0;
    const double noise = cfg.noise();
    const double root_eps = std::sqrt(cfg.eps);
    const std::size_t batch = state.rows(), d = state.cols();

    std::vector<std::uint8_t> last_flags(batch, 0);
    auto snapshot = [&](int step, const FieldEval& e) {
        chain.recorded_steps.push_back(step);
        chain.positions.push_back(e.decoded.empty() ? state : e.decoded);
        chain.values.push_back(e.value);
        if (cfg.mh_correction) chain.accept_flags.push_back(last_flags);
    };

    FieldEval e;
    for (int t = 0; t < cfg.steps; ++t) {
        e = field_eval(field, state);
        if (record && t % cfg.record_every == 0) snapshot(t, e);
        if (cfg.mh_correction) {
            const Tensor w = gaussian(rng, state.shape());
            Tensor prop = state;
            for (std::size_t i = 0; i < prop.size(); ++i) {
                prop[i] += 0.5 * cfg.eps * e.grad[i] + noise * root_eps * w[i];
            }
            if (!prop.all_finite()) throw ChainDivergedError(state);
            const FieldEval pe = field_eval(field, prop);
            const Tensor log_alpha = mala_log_accept_rows(state, e, prop, pe, cfg.eps, noise);
            Tensor u({batch});
            for (std::size_t i = 0; i < batch; ++i) u[i] = rng.uniform01();
            for (std::size_t i = 0; i < batch; ++i) {
                ++chain.proposals;
                last_flags[i] = 0;
                if (std::log(std::max(u[i], 1e-300)) < std::min(0.0, log_alpha[i])) {
                    ++chain.accepted;
                    last_flags[i] = 1;
                    for (std::size_t j = 0; j < d; ++j) state[i * d + j] = prop[i * d + j];
                }
            }
        } else {
            const Tensor w = gaussian(rng, state.shape());
            Tensor next = state;
            for (std::size_t i = 0; i < next.size(); ++i) {
                next[i] += 0.5 * cfg.eps * e.grad[i] + noise * root_eps * w[i];
            }
            if (!next.all_finite()) throw ChainDivergedError(std::move(state));
            state = std::move(next);
        }
    }

    FieldEval last = field_eval(field, state);
    if (record) snapshot(cfg.steps, last);
    chain.output = last.decoded.empty() ? state : last.decoded;
    return chain;
}

}  // namespace detail

/// Chain over an arbitrary field in its own state space (pixel-space form).
template <ScalarField F>
ChainState run_chain_field(const F& field, const Tensor& init, const LangevinConfig& cfg, Rng& rng) {
    if (cfg.space != Space::Pixel) {
        throw std::invalid_argument("run_chain_field: latent chains need a generator; use run_chain");
    }
    return detail::run_chain_impl(field, init, cfg, rng);
}

/// Pixel space iterates on the samples themselves; latent space iterates on
/// z under D(G(z)) and returns the decoded G(z_K). K = 0 leaves the state
/// untouched (latent chains still decode it).
inline ChainState run_chain(const MlpCritic& critic, const MlpGenerator* generator,
                            const Tensor& init, const LangevinConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.space == Space::Latent) {
        if (generator == nullptr) {
            throw std::invalid_argument("run_chain: latent space requires a generator");
        }
        LatentCriticField field{&critic, generator};
        return detail::run_chain_impl(field, init, cfg, rng);
    }
    CriticField field{&critic};
    return detail::run_chain_impl(field, init, cfg, rng);
}

/// Discriminator optimal transport baseline: gradient descent on
/// |x - y|_2 - D(x) started from x (y defaults to the start point). With a
/// unit-slope critic every point of the transport segment is stationary, so
/// different starts legitimately return different fixed points.
template <ScalarField F>
Tensor dot_refine(const F& field, const Tensor& x, std::optional<Tensor> y_target, double eps,
                  int steps) {
    if (eps < 0.0) throw std::invalid_argument("dot_refine: eps must be >= 0");
    if (steps < 0) throw std::invalid_argument("dot_refine: steps must be >= 0");
    const Tensor y = y_target.value_or(x);
    if (!y.same_shape(x)) throw std::invalid_argument("dot_refine: y_target shape mismatch");
    Tensor cur = x;
    if (eps == 0.0) return cur;
    const std::size_t batch = x.rows(), d = x.cols();
    for (int t = 0; t < steps; ++t) {
        const Tensor g = field.grad(cur);
        for (std::size_t i = 0; i < batch; ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = cur[i * d + j] - y[i * d + j];
                r += diff * diff;
            }
            r = std::sqrt(r);
            for (std::size_t j = 0; j < d; ++j) {
                const double dir = r > 0.0 ? (cur[i * d + j] - y[i * d + j]) / r : 0.0;
                cur[i * d + j] -= eps * (dir - g[i * d + j]);
            }
        }
        if (!cur.all_finite()) throw ChainDivergedError(x);
    }
    return cur;
}

}  // namespace dcd
