#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcd/checkpoint.hpp"
#include "dcd/dcd.hpp"
#include "dcd/eval.hpp"
#include "dcd/sampler.hpp"
#include "dcd/tensor.hpp"
#include "dcd/wgan.hpp"

namespace dcd {

/// Shortest decimal form that round-trips the exact double.
inline std::string fmt_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}
}  // namespace detail

inline void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
    std::ofstream out = detail::open_out(path);
    out << "iter,critic_loss,generator_loss\n";
    for (const TrainRecord& r : log.records) {
        out << r.iter << ',' << fmt_double(r.critic_loss) << ',' << fmt_double(r.generator_loss) << '\n';
    }
}

inline void write_dcd_log_csv(const std::filesystem::path& path, const DcdLog& log) {
    std::ofstream out = detail::open_out(path);
    out << "iter,objective,mean_d_real,mean_d_chain,acceptance_rate\n";
    for (const DcdRecord& r : log.records) {
        out << r.iter << ',' << fmt_double(r.objective) << ',' << fmt_double(r.mean_d_real) << ','
            << fmt_double(r.mean_d_chain) << ',';
        if (r.acceptance_rate >= 0.0) out << fmt_double(r.acceptance_rate);
        out << '\n';
    }
}

inline void write_samples_csv(const std::filesystem::path& path, const Tensor& samples) {
    std::ofstream out = detail::open_out(path);
    out << "x0,x1\n";
    for (std::size_t i = 0; i < (samples.empty() ? 0 : samples.rows()); ++i) {
        out << fmt_double(samples.at(i, 0)) << ',' << fmt_double(samples.at(i, 1)) << '\n';
    }
}

/// One row per (snapshot, chain). For MH chains `accepted` is the 0/1 flag
/// of the proposal that produced this state; the column is empty for
/// unadjusted chains.
inline void write_trajectory_csv(const std::filesystem::path& path, const ChainState& chain,
                                 bool mh) {
    std::ofstream out = detail::open_out(path);
    out << "step,chain,x0,x1,d_value,accepted\n";
    for (std::size_t s = 0; s < chain.recorded_steps.size(); ++s) {
        const Tensor& pos = chain.positions[s];
        const Tensor& val = chain.values[s];
        for (std::size_t i = 0; i < pos.rows(); ++i) {
            out << chain.recorded_steps[s] << ',' << i << ',' << fmt_double(pos.at(i, 0)) << ','
                << fmt_double(pos.at(i, 1)) << ',' << fmt_double(val[i]) << ',';
            if (mh && s < chain.accept_flags.size()) out << int(chain.accept_flags[s][i]);
            out << '\n';
        }
    }
}

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Samples written by write_samples_csv; malformed rows are reported with
/// their 1-based line number.
inline Tensor read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path.string() + ": missing header");
    std::vector<double> vals;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw CsvError(path.string() + ": line " + std::to_string(lineno) + ": expected two columns");
        }
        double a = 0, b = 0;
        const char* s0 = line.data();
        const char* e0 = line.data() + comma;
        const char* s1 = line.data() + comma + 1;
        const char* e1 = line.data() + line.size();
        if (e1 > s1 && *(e1 - 1) == '\r') --e1;
        const auto r0 = std::from_chars(s0, e0, a);
        const auto r1 = std::from_chars(s1, e1, b);
        if (r0.ec != std::errc{} || r0.ptr != e0 || r1.ec != std::errc{} || r1.ptr != e1) {
            throw CsvError(path.string() + ": line " + std::to_string(lineno) + ": malformed number");
        }
        vals.push_back(a);
        vals.push_back(b);
    }
    if (vals.empty()) return Tensor();
    const std::size_t rows = vals.size() / 2;
    return Tensor::from_data({rows, 2}, std::move(vals));
}

inline void write_level_grid_csv(const std::filesystem::path& path, const LevelGrid& grid) {
    std::ofstream out = detail::open_out(path);
    out << "x0,x1,d\n";
    for (std::size_t iy = 0; iy < grid.res_y; ++iy) {
        for (std::size_t ix = 0; ix < grid.res_x; ++ix) {
            out << fmt_double(grid.x_coord(ix)) << ',' << fmt_double(grid.y_coord(iy)) << ','
                << fmt_double(grid.at(iy, ix)) << '\n';
        }
    }
}

/// Binary PPM heatmap, min-max normalized per grid (the normalization bounds
/// are recorded in a comment). Dark blue = low, yellow = high; y grows
/// upward, so the top image row is the largest y.
inline void write_level_grid_ppm(const std::filesystem::path& path, const LevelGrid& grid) {
    double lo = grid.values[0], hi = grid.values[0];
    for (double v : grid.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream out = detail::open_out(path);
    out << "P6\n# min=" << fmt_double(lo) << " max=" << fmt_double(hi) << " normalization=minmax\n"
        << grid.res_x << ' ' << grid.res_y << "\n255\n";
    auto channel = [](double t, double a, double b) {
        const double v = a + (b - a) * t;
        const int c = static_cast<int>(v * 255.0 + 0.5);
        return static_cast<unsigned char>(std::clamp(c, 0, 255));
    };
    for (std::size_t iy = grid.res_y; iy-- > 0;) {
        for (std::size_t ix = 0; ix < grid.res_x; ++ix) {
            const double t = (grid.at(iy, ix) - lo) / span;
            const unsigned char rgb[3] = {channel(t, 0.27, 0.99), channel(t, 0.00, 0.91),
                                          channel(t, 0.33, 0.14)};
            out.write(reinterpret_cast<const char*>(rgb), 3);
        }
    }
}

inline nlohmann::json mode_report_json(const ModeReport& r) {
    nlohmann::json j;
    j["modes_total"] = r.modes_total;
    j["modes_recovered"] = r.modes_recovered;
    j["high_quality_fraction"] = r.high_quality_fraction;
    j["mean_nearest_mode_distance"] = r.mean_nearest_mode_distance;
    j["per_mode_counts"] = r.per_mode_counts;
    j["sample_count"] = r.sample_count;
    j["hq_sigmas"] = r.hq_sigmas;
    return j;
}

inline void write_mode_report_json(const std::filesystem::path& path, const ModeReport& r) {
    detail::write_text_file(path, mode_report_json(r).dump(2) + "\n");
}

}  // namespace dcd
