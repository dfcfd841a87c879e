#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcd/tensor.hpp"

namespace dcd {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;
};

enum class Direction { Descend, Ascend };

/// Bias-corrected Adam. Moment buffers are sized on the first step and must
/// see the same parameter shapes ever after.
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return step_; }

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              Direction direction) {
        if (params.size() != grads.size()) {
            throw std::invalid_argument("adam: parameter/gradient count mismatch");
        }
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        if (m_.size() != params.size()) {
            throw std::invalid_argument("adam: parameter count changed between steps");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(m_[i])) {
                throw std::invalid_argument("adam: shape mismatch for parameter " + std::to_string(i));
            }
            if (!grads[i]->all_finite()) {
                throw std::runtime_error("adam: non-finite gradient for parameter " + std::to_string(i) +
                                         " " + shape_str(grads[i]->shape()));
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        const double sign = direction == Direction::Ascend ? -1.0 : 1.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g0 = *grads[i];
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double g = sign * g0[j];
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::int64_t step_ = 0;
};

}  // namespace dcd
