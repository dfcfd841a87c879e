#pragma once

#include <concepts>

#include "dcd/mlp.hpp"
#include "dcd/tape.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

/// Differentiable scalar field over batched points: value is one scalar per
/// row, grad matches the input shape. Samplers are generic over this so the
/// same chain code runs on trained critics and on closed-form test targets.
template <typename F>
concept ScalarField = requires(const F& f, const Tensor& x) {
    { f.value(x) } -> std::convertible_to<Tensor>;
    { f.grad(x) } -> std::convertible_to<Tensor>;
};

/// One evaluation of a field: per-row value, gradient w.r.t. the chain
/// state, and (for latent fields) the decoded sample-space points.
struct FieldEval {
    Tensor value;    // [batch]
    Tensor grad;     // [batch, d]
    Tensor decoded;  // [batch, 2] or empty when the state is already sample space
};

namespace detail {
inline Tensor squeeze_col(const Tensor& t) {
    Tensor out({t.rows()});
    for (std::size_t i = 0; i < t.rows(); ++i) out[i] = t[i];
    return out;
}
}  // namespace detail

template <ScalarField F>
FieldEval field_eval(const F& f, const Tensor& x) {
    if constexpr (requires(const F& g) { { g.eval(x) } -> std::convertible_to<FieldEval>; }) {
        return f.eval(x);
    } else {
        return FieldEval{f.value(x), f.grad(x), {}};
    }
}

/// D_phi over sample space.
struct CriticField {
    const MlpCritic* critic;

    Tensor value(const Tensor& x) const { return critic_value(*critic, x); }
    Tensor grad(const Tensor& x) const { return critic_input_grad(*critic, x); }

    FieldEval eval(const Tensor& x) const {
        ChainEval e = eval_mlp_chain({&critic->net}, x);
        return FieldEval{std::move(e.value), std::move(e.grad), {}};
    }
};

/// z -> D_phi(G_theta(z)) with the gradient taken through both networks;
/// both networks' parameters are frozen.
struct LatentCriticField {
    const MlpCritic* critic;
    const MlpGenerator* generator;

    Tensor decode(const Tensor& z) const { return generator->forward(z); }
    Tensor value(const Tensor& z) const { return critic_value(*critic, generator->forward(z)); }
    Tensor grad(const Tensor& z) const { return eval(z).grad; }

    FieldEval eval(const Tensor& z) const {
        ChainEval e = eval_mlp_chain({&generator->net, &critic->net}, z, 0);
        return FieldEval{std::move(e.value), std::move(e.grad), std::move(e.decoded)};
    }
};

}  // namespace dcd
