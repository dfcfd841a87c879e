#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "dcd/eval.hpp"
#include "dcd/fields.hpp"
#include "dcd/mixture.hpp"
#include "test_support.hpp"

using namespace dcd;

namespace {

struct FnField {
    std::function<double(double, double)> f;
    Tensor value(const Tensor& x) const {
        Tensor v({x.rows()});
        for (std::size_t i = 0; i < x.rows(); ++i) v[i] = f(x.at(i, 0), x.at(i, 1));
        return v;
    }
};

}  // namespace

TEST_CASE("samples at every ring mean recover all modes") {
    MixtureSpec spec = ring8();
    Tensor samples({8, 2});
    for (std::size_t k = 0; k < 8; ++k) {
        samples.at(k, 0) = spec.modes[k].mean[0];
        samples.at(k, 1) = spec.modes[k].mean[1];
    }
    ModeReport r = mode_report(spec, samples);
    CHECK(r.modes_total == 8);
    CHECK(r.modes_recovered == 8);
    CHECK(r.high_quality_fraction == doctest::Approx(1.0));
    CHECK(r.mean_nearest_mode_distance == doctest::Approx(0.0));
}

TEST_CASE("total collapse recovers one mode with perfect quality") {
    MixtureSpec spec = ring8();
    Tensor samples({500, 2});
    for (std::size_t i = 0; i < 500; ++i) {
        samples.at(i, 0) = spec.modes[3].mean[0];
        samples.at(i, 1) = spec.modes[3].mean[1];
    }
    ModeReport r = mode_report(spec, samples);
    CHECK(r.modes_recovered == 1);
    CHECK(r.high_quality_fraction == doctest::Approx(1.0));
    CHECK(r.per_mode_counts[3] == 500);
}

TEST_CASE("true mixture draws are almost all high quality (chi-square tail)") {
    MixtureSpec spec = ring8();
    Rng rng(2718);
    Tensor samples = sample(spec, rng, 100000);
    ModeReport r = mode_report(spec, samples, 4.0);
    CHECK(r.modes_recovered == 8);
    CHECK(r.high_quality_fraction >= 0.999);  // P(chi^2_2 <= 16) ~ 0.99966
    std::size_t total = 0;
    for (std::size_t c : r.per_mode_counts) total += c;
    CHECK(total == r.sample_count);
}

TEST_CASE("mode report is permutation invariant") {
    MixtureSpec spec = grid25();
    Rng rng(5);
    Tensor samples = sample(spec, rng, 3000);
    ModeReport a = mode_report(spec, samples);

    // reverse the rows
    Tensor rev(samples.shape());
    const std::size_t n = samples.rows();
    for (std::size_t i = 0; i < n; ++i) {
        rev.at(n - 1 - i, 0) = samples.at(i, 0);
        rev.at(n - 1 - i, 1) = samples.at(i, 1);
    }
    ModeReport b = mode_report(spec, rev);
    CHECK(a.modes_recovered == b.modes_recovered);
    CHECK(a.high_quality_fraction == b.high_quality_fraction);
    CHECK(a.per_mode_counts == b.per_mode_counts);
    CHECK(a.mean_nearest_mode_distance == doctest::Approx(b.mean_nearest_mode_distance).epsilon(1e-12));
}

TEST_CASE("level grid of a constant critic is constant") {
    FnField field{[](double, double) { return 3.25; }};
    LevelGrid g = level_grid(field, -1, 1, -1, 1, 5, 5);
    for (double v : g.values) CHECK(v == 3.25);
}

TEST_CASE("level grid of a linear critic increases along x") {
    FnField field{[](double x0, double) { return x0; }};
    LevelGrid g = level_grid(field, -2, 2, -1, 1, 9, 3);
    for (std::size_t iy = 0; iy < 3; ++iy) {
        for (std::size_t ix = 1; ix < 9; ++ix) CHECK(g.at(iy, ix) > g.at(iy, ix - 1));
    }
}

TEST_CASE("level grid values equal pointwise critic calls") {
    Rng rng(7);
    MlpCritic critic = make_critic(rng, 16);
    CriticField field{&critic};
    LevelGrid g = level_grid(field, -3, 3, -2, 2, 7, 5);
    for (std::size_t iy = 0; iy < 5; ++iy) {
        for (std::size_t ix = 0; ix < 7; ++ix) {
            Tensor one({1, 2});
            one.at(0, 0) = g.x_coord(ix);
            one.at(0, 1) = g.y_coord(iy);
            CHECK(g.at(iy, ix) == critic_value(critic, one)[0]);
        }
    }
}

TEST_CASE("finer grids contain coarse lattice values exactly") {
    Rng rng(8);
    MlpCritic critic = make_critic(rng, 16);
    CriticField field{&critic};
    const std::size_t r = 6;
    LevelGrid coarse = level_grid(field, -2.5, 1.5, -1.0, 3.0, r, r);
    LevelGrid fine = level_grid(field, -2.5, 1.5, -1.0, 3.0, 2 * r - 1, 2 * r - 1);
    for (std::size_t iy = 0; iy < r; ++iy) {
        for (std::size_t ix = 0; ix < r; ++ix) {
            CHECK(fine.at(2 * iy, 2 * ix) == coarse.at(iy, ix));  // bit-exact shared points
        }
    }
}

TEST_CASE("level grid input validation") {
    FnField field{[](double, double) { return 0.0; }};
    CHECK_THROWS_AS(level_grid(field, 1, -1, 0, 1, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(level_grid(field, -1, 1, 0, 1, 1, 4), std::invalid_argument);
}

TEST_CASE("spearman handles ties and monotone maps") {
    std::vector<double> xs = {1, 2, 3, 4, 5};
    std::vector<double> ys = {2, 4, 6, 8, 10};
    CHECK(spearman(xs, ys) == doctest::Approx(1.0));
    std::vector<double> neg = {5, 4, 3, 2, 1};
    CHECK(spearman(xs, neg) == doctest::Approx(-1.0));
    bool degenerate = false;
    std::vector<double> flat = {1, 1, 1, 1, 1};
    CHECK(spearman(xs, flat, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("energy alignment of the true log density is 1") {
    MixtureSpec spec = ring8();
    FnField truth{[&](double a, double b) { return log_density(spec, a, b); }};
    Rng rng(11);
    CHECK(energy_alignment(spec, truth, 1500, rng) == doctest::Approx(1.0));

    FnField anti{[&](double a, double b) { return -log_density(spec, a, b); }};
    Rng rng2(11);
    CHECK(energy_alignment(spec, anti, 1500, rng2) == doctest::Approx(-1.0));

    FnField flat{[](double, double) { return 0.5; }};
    Rng rng3(11);
    bool degenerate = false;
    CHECK(energy_alignment(spec, flat, 1500, rng3, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("energy alignment is invariant to positive affine rescaling") {
    MixtureSpec spec = grid25();
    Rng rng(13);
    MlpCritic critic = make_critic(rng, 32);
    CriticField field{&critic};
    FnField rescaled{[&](double a, double b) {
        Tensor one({1, 2});
        one.at(0, 0) = a;
        one.at(0, 1) = b;
        return 7.5 * critic_value(critic, one)[0] + 42.0;
    }};
    Rng r1(17), r2(17);
    const double base = energy_alignment(spec, field, 800, r1);
    const double scaled = energy_alignment(spec, rescaled, 800, r2);
    CHECK(base == doctest::Approx(scaled).epsilon(1e-12));
}
