#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

struct GaussianMode {
    std::array<double, 2> mean;
    double std;
};

/// Exact 2D isotropic Gaussian mixture: training data source and the
/// verification oracle (analytic density and score).
struct MixtureSpec {
    std::vector<GaussianMode> modes;
    std::vector<double> weights;

    void validate() const {
        if (modes.empty()) throw std::invalid_argument("MixtureSpec: need at least one mode");
        if (modes.size() != weights.size()) {
            throw std::invalid_argument("MixtureSpec: modes/weights size mismatch");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("MixtureSpec: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("MixtureSpec: weights must sum to 1");
        for (const GaussianMode& m : modes) {
            if (!(m.std > 0.0)) throw std::invalid_argument("MixtureSpec: std must be positive");
            if (!std::isfinite(m.mean[0]) || !std::isfinite(m.mean[1])) {
                throw std::invalid_argument("MixtureSpec: non-finite mode mean");
            }
        }
    }
};

/// Eight equal-weight modes on a circle of radius `radius`, mode k at angle
/// 2*pi*k/8 starting from (radius, 0).
inline MixtureSpec ring8(double radius = 2.0, double std = 0.02) {
    MixtureSpec spec;
    for (int k = 0; k < 8; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / 8.0;
        spec.modes.push_back({{radius * std::cos(theta), radius * std::sin(theta)}, std});
        spec.weights.push_back(1.0 / 8.0);
    }
    spec.validate();
    return spec;
}

/// 5x5 equal-weight grid centered at the origin with the given spacing.
inline MixtureSpec grid25(double spacing = 2.0, double std = 0.05) {
    MixtureSpec spec;
    for (int i = -2; i <= 2; ++i) {
        for (int j = -2; j <= 2; ++j) {
            spec.modes.push_back({{spacing * i, spacing * j}, std});
            spec.weights.push_back(1.0 / 25.0);
        }
    }
    spec.validate();
    return spec;
}

inline MixtureSpec single_gaussian(std::array<double, 2> mean, double std) {
    MixtureSpec spec{{{mean, std}}, {1.0}};
    spec.validate();
    return spec;
}

/// n i.i.d. draws, one row per sample. Consumes 1 uniform + 2 normals per row.
inline Tensor sample(const MixtureSpec& spec, Rng& rng, std::size_t n) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        std::size_t k = 0;
        double cdf = 0.0;
        for (; k + 1 < spec.modes.size(); ++k) {
            cdf += spec.weights[k];
            if (u < cdf) break;
        }
        const GaussianMode& m = spec.modes[k];
        out.at(i, 0) = m.mean[0] + m.std * rng.gaussian();
        out.at(i, 1) = m.mean[1] + m.std * rng.gaussian();
    }
    return out;
}

/// Log-sum-exp mixture log-density; stable far into the tails.
inline double log_density(const MixtureSpec& spec, double x0, double x1) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(spec.modes.size());
    for (std::size_t k = 0; k < spec.modes.size(); ++k) {
        const GaussianMode& m = spec.modes[k];
        const double dx = x0 - m.mean[0], dy = x1 - m.mean[1];
        const double s2 = m.std * m.std;
        terms[k] = std::log(spec.weights[k]) - std::log(2.0 * std::numbers::pi * s2) -
                   (dx * dx + dy * dy) / (2.0 * s2);
        if (terms[k] > max_term) max_term = terms[k];
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc);
}

/// Analytic gradient of log_density: responsibility-weighted Gaussian scores.
inline std::array<double, 2> score(const MixtureSpec& spec, double x0, double x1) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(spec.modes.size());
    for (std::size_t k = 0; k < spec.modes.size(); ++k) {
        const GaussianMode& m = spec.modes[k];
        const double dx = x0 - m.mean[0], dy = x1 - m.mean[1];
        const double s2 = m.std * m.std;
        terms[k] = std::log(spec.weights[k]) - std::log(2.0 * std::numbers::pi * s2) -
                   (dx * dx + dy * dy) / (2.0 * s2);
        if (terms[k] > max_term) max_term = terms[k];
    }
    double z = 0.0;
    for (double t : terms) z += std::exp(t - max_term);
    std::array<double, 2> g{0.0, 0.0};
    for (std::size_t k = 0; k < spec.modes.size(); ++k) {
        const GaussianMode& m = spec.modes[k];
        const double resp = std::exp(terms[k] - max_term) / z;
        const double s2 = m.std * m.std;
        g[0] += resp * (m.mean[0] - x0) / s2;
        g[1] += resp * (m.mean[1] - x1) / s2;
    }
    return g;
}

}  // namespace dcd
