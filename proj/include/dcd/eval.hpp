#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dcd/mixture.hpp"
#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

/// Anything that can score batched 2D points.
template <typename F>
concept ValueField = requires(const F& f, const Tensor& x) {
    { f.value(x) } -> std::convertible_to<Tensor>;
};

struct ModeReport {
    std::size_t modes_total = 0;
    std::size_t modes_recovered = 0;
    double high_quality_fraction = 0.0;
    double mean_nearest_mode_distance = 0.0;
    std::vector<std::size_t> per_mode_counts;  // nearest-mode assignment, sums to sample count
    std::size_t sample_count = 0;
    double hq_sigmas = 4.0;
};

/// Assign each sample to its nearest mode. A sample is high quality when it
/// lies within hq_sigmas standard deviations of that mode; a mode counts as
/// recovered when at least n / (10 * #modes) samples sit that close to it.
inline ModeReport mode_report(const MixtureSpec& spec, const Tensor& samples,
                              double hq_sigmas = 4.0) {
    spec.validate();
    if (samples.rank() != 2 || samples.cols() != 2 || samples.rows() < 1) {
        throw std::invalid_argument("mode_report: samples must be [n, 2] with n >= 1");
    }
    const std::size_t n = samples.rows();
    const std::size_t k = spec.modes.size();
    ModeReport report;
    report.modes_total = k;
    report.sample_count = n;
    report.hq_sigmas = hq_sigmas;
    report.per_mode_counts.assign(k, 0);

    std::vector<std::size_t> hq_counts(k, 0);
    std::size_t hq_total = 0;
    double dist_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = samples.at(i, 0), x1 = samples.at(i, 1);
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            const double dx = x0 - spec.modes[j].mean[0];
            const double dy = x1 - spec.modes[j].mean[1];
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        const double dist = std::sqrt(best_d2);
        dist_sum += dist;
        ++report.per_mode_counts[best];
        if (dist <= hq_sigmas * spec.modes[best].std) {
            ++hq_counts[best];
            ++hq_total;
        }
    }
    const double recover_threshold = static_cast<double>(n) / (10.0 * static_cast<double>(k));
    for (std::size_t j = 0; j < k; ++j) {
        if (static_cast<double>(hq_counts[j]) >= recover_threshold) ++report.modes_recovered;
    }
    report.high_quality_fraction = static_cast<double>(hq_total) / static_cast<double>(n);
    report.mean_nearest_mode_distance = dist_sum / static_cast<double>(n);
    return report;
}

struct LevelGrid {
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    std::size_t res_x = 0, res_y = 0;
    std::vector<double> values;  // row-major over y (rows) then x (cols)

    double at(std::size_t iy, std::size_t ix) const { return values[iy * res_x + ix]; }
    double x_coord(std::size_t ix) const {
        return x_min + static_cast<double>(ix) * ((x_max - x_min) / static_cast<double>(res_x - 1));
    }
    double y_coord(std::size_t iy) const {
        return y_min + static_cast<double>(iy) * ((y_max - y_min) / static_cast<double>(res_y - 1));
    }
};

/// Critic values on an inclusive lattice. Coordinates are computed as
/// lo + i * step so grids at resolution r and 2r-1 share lattice points
/// bit-exactly.
template <ValueField F>
LevelGrid level_grid(const F& field, double x_min, double x_max, double y_min, double y_max,
                     std::size_t res_x, std::size_t res_y) {
    if (res_x < 2 || res_y < 2) throw std::invalid_argument("level_grid: resolution must be >= 2 per axis");
    if (!(x_min < x_max) || !(y_min < y_max)) {
        throw std::invalid_argument("level_grid: ranges must satisfy min < max");
    }
    LevelGrid grid{x_min, x_max, y_min, y_max, res_x, res_y, {}};
    Tensor points({res_x * res_y, 2});
    for (std::size_t iy = 0; iy < res_y; ++iy) {
        for (std::size_t ix = 0; ix < res_x; ++ix) {
            points.at(iy * res_x + ix, 0) = grid.x_coord(ix);
            points.at(iy * res_x + ix, 1) = grid.y_coord(iy);
        }
    }
    const Tensor v = field.value(points);
    grid.values.assign(v.data(), v.data() + v.size());
    return grid;
}

/// Spearman rank correlation with average ranks for ties. Returns 0 for
/// degenerate (constant) inputs; `degenerate` reports that case.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                       bool* degenerate = nullptr) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length series of size >= 2");
    }
    if (degenerate) *degenerate = false;
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(xs), ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Rank correlation between the critic and the true log-density over n
/// mixture draws plus n uniform background points (mode bounding box padded
/// by 2). Rank-based, so any positive rescaling of the critic scores the
/// same.
template <ValueField F>
double energy_alignment(const MixtureSpec& spec, const F& field, std::size_t n, Rng& rng,
                        bool* degenerate = nullptr) {
    spec.validate();
    if (n < 2) throw std::invalid_argument("energy_alignment: n must be >= 2");
    double lo0 = spec.modes[0].mean[0], hi0 = lo0, lo1 = spec.modes[0].mean[1], hi1 = lo1;
    for (const GaussianMode& m : spec.modes) {
        lo0 = std::min(lo0, m.mean[0]);
        hi0 = std::max(hi0, m.mean[0]);
        lo1 = std::min(lo1, m.mean[1]);
        hi1 = std::max(hi1, m.mean[1]);
    }
    constexpr double kPad = 2.0;
    lo0 -= kPad;
    hi0 += kPad;
    lo1 -= kPad;
    hi1 += kPad;

    Tensor points({2 * n, 2});
    const Tensor draws = sample(spec, rng, n);
    for (std::size_t i = 0; i < n; ++i) {
        points.at(i, 0) = draws.at(i, 0);
        points.at(i, 1) = draws.at(i, 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        points.at(n + i, 0) = lo0 + (hi0 - lo0) * rng.uniform01();
        points.at(n + i, 1) = lo1 + (hi1 - lo1) * rng.uniform01();
    }

    const Tensor d = field.value(points);
    std::vector<double> logp(2 * n), dv(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        logp[i] = log_density(spec, points.at(i, 0), points.at(i, 1));
        dv[i] = d[i];
    }
    return spearman(logp, dv, degenerate);
}

}  // namespace dcd
