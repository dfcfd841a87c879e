#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dcd/tape.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

enum class LossVariant { Wgan, Hinge, Logistic };

inline const char* to_string(LossVariant v) {
    switch (v) {
        case LossVariant::Wgan: return "wgan";
        case LossVariant::Hinge: return "hinge";
        case LossVariant::Logistic: return "logistic";
    }
    return "?";
}

inline LossVariant parse_loss_variant(const std::string& s) {
    if (s == "wgan") return LossVariant::Wgan;
    if (s == "hinge") return LossVariant::Hinge;
    if (s == "logistic") return LossVariant::Logistic;
    throw std::invalid_argument("unknown critic loss variant \"" + s + "\" (wgan|hinge|logistic)");
}

namespace detail {
inline double mean_of(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
    return s / static_cast<double>(t.size());
}
}  // namespace detail

/// Value the critic maximizes, given critic outputs on real and generated
/// batches:
///   wgan:     mean(d_real) - mean(d_fake)
///   hinge:    mean(min(0, -1 + d_real)) + mean(min(0, -1 - d_fake))
///   logistic: mean(-log(1+e^-d_real)) + mean(-log(1+e^d_fake))
inline double critic_loss(LossVariant variant, const Tensor& d_real, const Tensor& d_fake) {
    if (d_real.empty() || d_fake.empty()) throw std::invalid_argument("critic_loss: empty batch");
    switch (variant) {
        case LossVariant::Wgan:
            return detail::mean_of(d_real) - detail::mean_of(d_fake);
        case LossVariant::Hinge: {
            double r = 0.0, f = 0.0;
            for (std::size_t i = 0; i < d_real.size(); ++i) r += std::min(0.0, -1.0 + d_real[i]);
            for (std::size_t i = 0; i < d_fake.size(); ++i) f += std::min(0.0, -1.0 - d_fake[i]);
            return r / static_cast<double>(d_real.size()) + f / static_cast<double>(d_fake.size());
        }
        case LossVariant::Logistic: {
            double r = 0.0, f = 0.0;
            for (std::size_t i = 0; i < d_real.size(); ++i) r -= detail::softplus_value(-d_real[i]);
            for (std::size_t i = 0; i < d_fake.size(); ++i) f -= detail::softplus_value(d_fake[i]);
            return r / static_cast<double>(d_real.size()) + f / static_cast<double>(d_fake.size());
        }
    }
    throw std::logic_error("critic_loss: bad variant");
}

/// Value the generator minimizes (non-saturating for every variant).
inline double generator_loss(const Tensor& d_fake) {
    if (d_fake.empty()) throw std::invalid_argument("generator_loss: empty batch");
    return -detail::mean_of(d_fake);
}

/// Same objective recorded on a tape for gradient steps. The returned node
/// is the scalar the optimizer should ascend (critic's view).
inline NodeId tape_critic_loss(Tape& tape, LossVariant variant, NodeId d_real, NodeId d_fake) {
    switch (variant) {
        case LossVariant::Wgan:
            return tape.sub(tape.mean(d_real), tape.mean(d_fake));
        case LossVariant::Hinge: {
            // min(0,-1+d) = -relu(1-d);  min(0,-1-d) = -relu(1+d)
            NodeId r = tape.neg(tape.mean(tape.relu(tape.add_const(tape.neg(d_real), 1.0))));
            NodeId f = tape.neg(tape.mean(tape.relu(tape.add_const(d_fake, 1.0))));
            return tape.add(r, f);
        }
        case LossVariant::Logistic: {
            NodeId r = tape.neg(tape.mean(tape.softplus(tape.neg(d_real))));
            NodeId f = tape.neg(tape.mean(tape.softplus(d_fake)));
            return tape.add(r, f);
        }
    }
    throw std::logic_error("tape_critic_loss: bad variant");
}

}  // namespace dcd
