#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcd/rng.hpp"
#include "dcd/tape.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

/// One affine map. Weights are stored [in, out] so a batch forward is a
/// plain row-major matmul x*W + b.
struct AffineLayer {
    Tensor w;  // [in, out]
    Tensor b;  // [out]
};

struct Mlp {
    std::vector<AffineLayer> layers;

    std::size_t in_dim() const { return layers.front().w.rows(); }
    std::size_t out_dim() const { return layers.back().w.cols(); }

    /// ReLU between layers, linear output.
    Tensor forward(const Tensor& x) const {
        check_input(x);
        Tensor h = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const AffineLayer& L = layers[l];
            Tensor out({h.rows(), L.w.cols()});
            detail::matmul_acc(h.data(), L.w.data(), out.data(), h.rows(), h.cols(), L.w.cols());
            const std::size_t m = out.rows(), n = out.cols();
            const bool last = l + 1 == layers.size();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    double v = out[i * n + j] + L.b[j];
                    out[i * n + j] = last ? v : (v > 0.0 ? v : 0.0);
                }
            }
            h = std::move(out);
        }
        return h;
    }

    void check_input(const Tensor& x) const {
        if (layers.empty()) throw std::logic_error("Mlp: no layers");
        if (x.rank() != 2 || x.cols() != in_dim()) {
            throw std::invalid_argument("Mlp: input " + shape_str(x.shape()) + " does not match input dim " +
                                        std::to_string(in_dim()));
        }
    }
};

/// Uniform(-1,1)/sqrt(fan_in) weights, zero biases.
inline Mlp make_mlp(Rng& rng, const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least one layer");
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        AffineLayer layer{Tensor({dims[l], dims[l + 1]}), Tensor({dims[l + 1]})};
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
            layer.w[i] = (2.0 * rng.uniform01() - 1.0) * bound;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct MlpGenerator {
    Mlp net;
    Tensor forward(const Tensor& z) const { return net.forward(z); }
};

/// Critic with per-layer power-iteration state for spectral normalization.
struct MlpCritic {
    Mlp net;
    std::vector<Tensor> sn_u;  // [in] per layer
    std::vector<Tensor> sn_v;  // [out] per layer
};

inline MlpGenerator make_generator(Rng& rng, std::size_t hidden = 128) {
    return MlpGenerator{make_mlp(rng, {2, hidden, hidden, hidden, 2})};
}

inline MlpCritic make_critic(Rng& rng, std::size_t hidden = 128) {
    MlpCritic critic{make_mlp(rng, {2, hidden, hidden, hidden, 1}), {}, {}};
    for (const AffineLayer& L : critic.net.layers) {
        Tensor u = gaussian(rng, {L.w.rows()});
        Tensor v = gaussian(rng, {L.w.cols()});
        double nu = 0.0, nv = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) nu += u[i] * u[i];
        for (std::size_t i = 0; i < v.size(); ++i) nv += v[i] * v[i];
        nu = std::sqrt(nu);
        nv = std::sqrt(nv);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] /= nu;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] /= nv;
        critic.sn_u.push_back(std::move(u));
        critic.sn_v.push_back(std::move(v));
    }
    return critic;
}

/// Scalar critic output per batch row.
inline Tensor critic_value(const MlpCritic& critic, const Tensor& x) {
    Tensor d = critic.net.forward(x);  // [batch, 1]
    Tensor out({d.rows()});
    for (std::size_t i = 0; i < d.rows(); ++i) out[i] = d[i];
    return out;
}

/// Parameter leaves of an MLP on a tape, in (w0, b0, w1, b1, ...) order.
struct TapedParams {
    std::vector<NodeId> w_ids;
    std::vector<NodeId> b_ids;
};

inline TapedParams tape_params(Tape& tape, const Mlp& net, bool requires_grad) {
    TapedParams rec;
    for (const AffineLayer& L : net.layers) {
        rec.w_ids.push_back(tape.leaf(L.w, requires_grad));
        rec.b_ids.push_back(tape.leaf(L.b, requires_grad));
    }
    return rec;
}

/// Forward pass against existing parameter leaves, so the same weights can
/// feed several batches on one tape and their adjoints accumulate.
inline NodeId tape_mlp_with(Tape& tape, const TapedParams& params, NodeId x) {
    NodeId h = x;
    for (std::size_t l = 0; l < params.w_ids.size(); ++l) {
        h = tape.add_row(tape.matmul(h, params.w_ids[l]), params.b_ids[l]);
        if (l + 1 < params.w_ids.size()) h = tape.relu(h);
    }
    return h;
}

/// Records an MLP forward on a tape; returns parameter node ids and output.
struct TapedMlp {
    std::vector<NodeId> w_ids;
    std::vector<NodeId> b_ids;
    NodeId out = 0;
};

inline TapedMlp tape_mlp(Tape& tape, const Mlp& net, NodeId x, bool params_require_grad) {
    TapedParams params = tape_params(tape, net, params_require_grad);
    NodeId out = tape_mlp_with(tape, params, x);
    return TapedMlp{std::move(params.w_ids), std::move(params.b_ids), out};
}

/// Value, input gradient, and intermediate decode of a chain of MLPs
/// (scalar output from the last net; no activation between nets). This is
/// the hand-fused equivalent of taping the forward and back-propagating to
/// the input; it uses the same kernels in the same order, so results are
/// bit-identical to the tape path. Chain steps call it in their inner loop.
struct ChainEval {
    Tensor value;    // [batch]
    Tensor grad;     // [batch, in]
    Tensor decoded;  // output of net `decode_after`, empty if not requested
};

inline ChainEval eval_mlp_chain(const std::vector<const Mlp*>& nets, const Tensor& x,
                                std::size_t decode_after = static_cast<std::size_t>(-1)) {
    nets.front()->check_input(x);
    std::vector<Tensor> acts;           // post-activation per global layer
    std::vector<const Tensor*> weights; // matching weight per global layer
    std::vector<bool> relu_mask;        // whether the layer output passed relu
    ChainEval out;

    const Tensor* h = &x;
    for (std::size_t n = 0; n < nets.size(); ++n) {
        const Mlp& net = *nets[n];
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const AffineLayer& L = net.layers[l];
            Tensor a({h->rows(), L.w.cols()});
            detail::matmul_acc(h->data(), L.w.data(), a.data(), h->rows(), h->cols(), L.w.cols());
            const bool relu_here = l + 1 < net.layers.size();
            const std::size_t m = a.rows(), k = a.cols();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    double v = a[i * k + j] + L.b[j];
                    a[i * k + j] = relu_here ? (v > 0.0 ? v : 0.0) : v;
                }
            }
            acts.push_back(std::move(a));
            weights.push_back(&L.w);
            relu_mask.push_back(relu_here);
            h = &acts.back();
        }
        if (n == decode_after) out.decoded = *h;
    }

    const Tensor& last = acts.back();
    if (last.cols() != 1) throw std::logic_error("eval_mlp_chain: final net must be scalar-valued");
    out.value = Tensor({last.rows()});
    for (std::size_t i = 0; i < last.rows(); ++i) out.value[i] = last[i];

    // Reverse sweep with a seed of ones on the scalar output.
    Tensor g = Tensor::full(last.shape(), 1.0);
    for (std::size_t k = acts.size(); k-- > 0;) {
        const Tensor& w = *weights[k];
        Tensor wt = detail::transposed(w);
        const Tensor& below = k == 0 ? x : acts[k - 1];
        Tensor gh({below.rows(), below.cols()});
        detail::matmul_acc(g.data(), wt.data(), gh.data(), g.rows(), g.cols(), wt.cols());
        if (k > 0 && relu_mask[k - 1]) {
            const Tensor& hk = acts[k - 1];
            for (std::size_t i = 0; i < gh.size(); ++i) {
                if (!(hk[i] > 0.0)) gh[i] = 0.0;
            }
        }
        g = std::move(gh);
    }
    out.grad = std::move(g);
    return out;
}

/// d critic / d input, one row per batch row. Rows are independent, so
/// seeding the summed output recovers every per-row gradient in one sweep.
inline Tensor critic_input_grad(const MlpCritic& critic, const Tensor& x) {
    return eval_mlp_chain({&critic.net}, x).grad;
}

/// Parameter gradients of one MLP, shaped like the layers.
struct MlpGrads {
    std::vector<Tensor> dw, db;

    explicit MlpGrads(const Mlp& net) {
        for (const AffineLayer& L : net.layers) {
            dw.emplace_back(L.w.shape());
            db.emplace_back(L.b.shape());
        }
    }
};

/// Post-activation buffers of a forward pass (acts.back() is the output).
inline std::vector<Tensor> mlp_forward_acts(const Mlp& net, const Tensor& x) {
    net.check_input(x);
    std::vector<Tensor> acts;
    acts.reserve(net.layers.size());
    const Tensor* h = &x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const AffineLayer& L = net.layers[l];
        Tensor a({h->rows(), L.w.cols()});
        detail::matmul_acc(h->data(), L.w.data(), a.data(), h->rows(), h->cols(), L.w.cols());
        const bool relu_here = l + 1 < net.layers.size();
        const std::size_t m = a.rows(), k = a.cols();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                double v = a[i * k + j] + L.b[j];
                a[i * k + j] = relu_here ? (v > 0.0 ? v : 0.0) : v;
            }
        }
        acts.push_back(std::move(a));
        h = &acts.back();
    }
    return acts;
}

/// Reverse pass from d(loss)/d(output). Accumulates into `grads` (so the
/// same buffers can take several batches, matching how shared parameter
/// leaves accumulate on a tape) and returns d(loss)/d(input) when asked.
/// Kernels and visit order mirror Tape::backward exactly; results are
/// bit-identical to the tape path.
inline Tensor mlp_backward_acts(const Mlp& net, const Tensor& x, const std::vector<Tensor>& acts,
                                Tensor d_out, MlpGrads* grads, bool want_dx) {
    Tensor g = std::move(d_out);
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const AffineLayer& L = net.layers[k];
        const Tensor& below = k == 0 ? x : acts[k - 1];
        if (grads) {
            Tensor& db = grads->db[k];
            const std::size_t m = g.rows(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
            Tensor bt = detail::transposed(below);
            detail::matmul_acc(bt.data(), g.data(), grads->dw[k].data(), bt.rows(), bt.cols(),
                               g.cols());
        }
        if (k == 0 && !want_dx) return Tensor();
        Tensor wt = detail::transposed(L.w);
        Tensor gh({below.rows(), below.cols()});
        detail::matmul_acc(g.data(), wt.data(), gh.data(), g.rows(), g.cols(), wt.cols());
        if (k > 0) {
            const Tensor& hk = acts[k - 1];
            for (std::size_t i = 0; i < gh.size(); ++i) {
                if (!(hk[i] > 0.0)) gh[i] = 0.0;
            }
        }
        g = std::move(gh);
    }
    return g;
}

/// One round of power iteration:  v <- normalize(W^T u), u <- normalize(W v),
/// estimate sigma = u^T W v. Repeated `iters` times with persistent (u, v).
inline double power_iteration(const Tensor& w, Tensor& u, Tensor& v, int iters) {
    if (iters < 1) throw std::invalid_argument("power_iteration: iters must be >= 1");
    const std::size_t m = w.rows(), n = w.cols();
    if (u.size() != m || v.size() != n) {
        throw std::invalid_argument("power_iteration: u/v sizes do not match weight " + shape_str(w.shape()));
    }
    constexpr double kTiny = 1e-300;
    for (int it = 0; it < iters; ++it) {
        // v = normalize(W^T u)
        for (std::size_t j = 0; j < n; ++j) v[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double ui = u[i];
            for (std::size_t j = 0; j < n; ++j) v[j] += w[i * n + j] * ui;
        }
        double nv = 0.0;
        for (std::size_t j = 0; j < n; ++j) nv += v[j] * v[j];
        nv = std::sqrt(nv);
        if (nv < kTiny) return 0.0;  // zero matrix
        for (std::size_t j = 0; j < n; ++j) v[j] /= nv;
        // u = normalize(W v)
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * v[j];
            u[i] = s;
        }
        double nu = 0.0;
        for (std::size_t i = 0; i < m; ++i) nu += u[i] * u[i];
        nu = std::sqrt(nu);
        if (nu < kTiny) return 0.0;
        for (std::size_t i = 0; i < m; ++i) u[i] /= nu;
    }
    double sigma = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * v[j];
        sigma += u[i] * s;
    }
    return sigma;
}

/// Divide each weight matrix by its estimated top singular value. Biases are
/// untouched; they do not affect the Lipschitz constant.
inline void spectral_normalize(MlpCritic& critic, int power_iters) {
    if (power_iters < 1) throw std::invalid_argument("spectral_normalize: power_iters must be >= 1");
    for (std::size_t l = 0; l < critic.net.layers.size(); ++l) {
        Tensor& w = critic.net.layers[l].w;
        const double sigma = power_iteration(w, critic.sn_u[l], critic.sn_v[l], power_iters);
        if (sigma <= 0.0) continue;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] /= sigma;
    }
}

/// Near-exact per-layer spectral norms for audits; does not disturb the
/// persisted power-iteration state.
inline std::vector<double> critic_layer_spectral_norms(const MlpCritic& critic, int iters = 200) {
    std::vector<double> sigmas;
    for (std::size_t l = 0; l < critic.net.layers.size(); ++l) {
        Tensor u = critic.sn_u[l];
        Tensor v = critic.sn_v[l];
        sigmas.push_back(power_iteration(critic.net.layers[l].w, u, v, iters));
    }
    return sigmas;
}

}  // namespace dcd
