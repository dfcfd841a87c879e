#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dcd/adam.hpp"
#include "dcd/mlp.hpp"
#include "dcd/rng.hpp"
#include "test_support.hpp"

using namespace dcd;

namespace {

// Exact linear critic D(x) = w.x realized as a 4-layer ReLU net:
// first layer splits +/- components, middle layers pass them through.
MlpCritic exact_linear_critic(double w0, double w1) {
    Rng rng(1);
    MlpCritic critic = make_critic(rng, 2);
    auto& L = critic.net.layers;
    L[0].w = Tensor::from_data({2, 2}, {w0, -w0, w1, -w1});
    L[0].b = Tensor({2});
    L[1].w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    L[1].b = Tensor({2});
    L[2].w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    L[2].b = Tensor({2});
    L[3].w = Tensor::from_data({2, 1}, {1, -1});
    L[3].b = Tensor({1});
    return critic;
}

}  // namespace

TEST_CASE("critic with zero weights outputs zero") {
    Rng rng(3);
    MlpCritic critic = make_critic(rng, 16);
    for (auto& L : critic.net.layers) {
        L.w = Tensor(L.w.shape());
        L.b = Tensor(L.b.shape());
    }
    Tensor x = gaussian(rng, {5, 2});
    Tensor d = critic_value(critic, x);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 0.0);
}

TEST_CASE("critic value matches the straight-line oracle") {
    Rng rng(41);
    MlpCritic critic = make_critic(rng, 32);
    Tensor x = gaussian(rng, {7, 2});
    Tensor d = critic_value(critic, x);
    for (std::size_t i = 0; i < 7; ++i) {
        const auto expect = testsup::naive_mlp_row(critic.net, {x.at(i, 0), x.at(i, 1)});
        CHECK(d[i] == doctest::Approx(expect[0]).epsilon(1e-12));
    }
}

TEST_CASE("identical rows give identical critic outputs") {
    Rng rng(8);
    MlpCritic critic = make_critic(rng, 32);
    Tensor x({6, 2});
    for (std::size_t i = 0; i < 6; ++i) {
        x.at(i, 0) = 0.3;
        x.at(i, 1) = -1.1;
    }
    Tensor d = critic_value(critic, x);
    for (std::size_t i = 1; i < 6; ++i) CHECK(d[i] == d[0]);
}

TEST_CASE("critic rejects wrong input dimension") {
    Rng rng(4);
    MlpCritic critic = make_critic(rng, 8);
    CHECK_THROWS_AS(critic_value(critic, Tensor({3, 5})), std::invalid_argument);
    CHECK_THROWS_AS(critic_input_grad(critic, Tensor({4})), std::invalid_argument);
}

TEST_CASE("input gradient of an exact linear critic is w") {
    MlpCritic critic = exact_linear_critic(0.8, -0.3);
    Rng rng(12);
    Tensor x = gaussian(rng, {9, 2});
    Tensor d = critic_value(critic, x);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(d[i] == doctest::Approx(0.8 * x.at(i, 0) - 0.3 * x.at(i, 1)).epsilon(1e-12));
    }
    Tensor g = critic_input_grad(critic, x);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(g.at(i, 0) == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(g.at(i, 1) == doctest::Approx(-0.3).epsilon(1e-12));
    }
}

TEST_CASE("fused chain evaluation is bit-identical to the tape path") {
    Rng rng(61);
    MlpGenerator gen{make_mlp(rng, {2, 24, 24, 24, 2})};
    MlpCritic critic = make_critic(rng, 24);
    Tensor x = gaussian(rng, {17, 2});

    // critic only
    {
        ChainEval fused = eval_mlp_chain({&critic.net}, x);
        Tape tape;
        NodeId xid = tape.leaf(x, true);
        TapedMlp rec = tape_mlp(tape, critic.net, xid, false);
        tape.backward(tape.sum(rec.out));
        CHECK(fused.grad == tape.grad(xid));
        for (std::size_t i = 0; i < 17; ++i) CHECK(fused.value[i] == tape.value(rec.out)[i]);
        CHECK(fused.value == critic_value(critic, x));
    }
    // generator composed with critic, decoding the generator output
    {
        ChainEval fused = eval_mlp_chain({&gen.net, &critic.net}, x, 0);
        Tape tape;
        NodeId zid = tape.leaf(x, true);
        TapedMlp g = tape_mlp(tape, gen.net, zid, false);
        TapedMlp d = tape_mlp(tape, critic.net, g.out, false);
        tape.backward(tape.sum(d.out));
        CHECK(fused.grad == tape.grad(zid));
        CHECK(fused.decoded == tape.value(g.out));
        CHECK(fused.decoded == gen.forward(x));
        for (std::size_t i = 0; i < 17; ++i) CHECK(fused.value[i] == tape.value(d.out)[i]);
    }
}

TEST_CASE("input gradient matches finite differences") {
    Rng rng(55);
    MlpCritic critic = make_critic(rng, 24);
    Tensor x;
    for (int attempt = 0; attempt < 100; ++attempt) {
        x = gaussian(rng, {3, 2});
        if (testsup::relu_margin(critic.net, x) > 1e-3) break;
    }
    const Tensor g = critic_input_grad(critic, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            auto row_value = [&]() {
                Tensor one({1, 2});
                one.at(0, 0) = x.at(i, 0);
                one.at(0, 1) = x.at(i, 1);
                return critic_value(critic, one)[0];
            };
            const double fd = testsup::central_diff(&x.at(i, j), row_value);
            CHECK(testsup::rel_err(g.at(i, j), fd) <= 1e-5);
        }
    }
}

TEST_CASE("power iteration on diag(3,1) converges to 3") {
    Tensor w = Tensor::from_data({2, 2}, {3, 0, 0, 1});
    Rng rng(6);
    Tensor u = gaussian(rng, {2}), v = gaussian(rng, {2});
    const double sigma = power_iteration(w, u, v, 50);
    CHECK(std::abs(sigma - 3.0) < 1e-6);
    CHECK(std::abs(sigma - testsup::svd_top_singular_value(w)) < 1e-6);

    for (std::size_t i = 0; i < w.size(); ++i) w[i] /= sigma;
    CHECK(std::abs(testsup::svd_top_singular_value(w) - 1.0) < 1e-6);
}

TEST_CASE("identity weight has sigma 1 and is unchanged by normalization") {
    Rng rng(2);
    MlpCritic critic = make_critic(rng, 2);
    for (auto& L : critic.net.layers) {
        Tensor id(L.w.shape());
        for (std::size_t i = 0; i < std::min(L.w.rows(), L.w.cols()); ++i) id[i * L.w.cols() + i] = 1.0;
        L.w = id;
    }
    const Tensor before = critic.net.layers[1].w;
    spectral_normalize(critic, 50);
    const Tensor& after = critic.net.layers[1].w;
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-9));
}

TEST_CASE("rank-1 matrix sigma recovered after a single iteration") {
    Rng rng(10);
    Tensor a = gaussian(rng, {6}), b = gaussian(rng, {4});
    double na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) na += a[i] * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) nb += b[i] * b[i];
    const double scale = 5.0 / std::sqrt(na * nb);  // |a||b| = 5 after scaling
    Tensor w({6, 4});
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) w[i * 4 + j] = scale * a[i] * b[j];

    Tensor u = gaussian(rng, {6}), v = gaussian(rng, {4});
    const double sigma = power_iteration(w, u, v, 1);
    CHECK(sigma == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("power iteration estimate is non-decreasing and converges to the SVD oracle") {
    Rng rng(20);
    for (int trial = 0; trial < 20; ++trial) {
        Rng r = rng.sub(trial);
        Tensor w = gaussian(r, {5, 5});
        Tensor u = gaussian(r, {5}), v = gaussian(r, {5});
        double prev = 0.0;
        double sigma = 0.0;
        for (int k = 1; k <= 100; ++k) {
            sigma = power_iteration(w, u, v, 1);
            CHECK(sigma >= prev - 1e-12);
            prev = sigma;
        }
        CHECK(std::abs(sigma - testsup::svd_top_singular_value(w)) < 1e-4);
    }
}

TEST_CASE("normalized critic passes the pairwise Lipschitz audit") {
    Rng rng(70);
    MlpCritic critic = make_critic(rng, 64);
    spectral_normalize(critic, 100);
    double prod_sigma = 1.0;
    for (double s : critic_layer_spectral_norms(critic)) prod_sigma *= s;
    CHECK(prod_sigma == doctest::Approx(1.0).epsilon(1e-3));

    const double bound = (1.0 + 1e-2) * prod_sigma;
    for (int i = 0; i < 1000; ++i) {
        Tensor pair = gaussian(rng, {2, 2});
        for (std::size_t k = 0; k < 4; ++k) pair[k] *= 3.0;
        const Tensor d = critic_value(critic, pair);
        const double dx0 = pair.at(0, 0) - pair.at(1, 0);
        const double dx1 = pair.at(0, 1) - pair.at(1, 1);
        const double dist = std::sqrt(dx0 * dx0 + dx1 * dx1);
        CHECK(std::abs(d[0] - d[1]) <= bound * dist + 1e-12);
    }
}

TEST_CASE("input gradient norm respects the Lipschitz product bound") {
    Rng rng(72);
    MlpCritic critic = make_critic(rng, 32);
    spectral_normalize(critic, 100);
    double prod_sigma = 1.0;
    for (double s : critic_layer_spectral_norms(critic)) prod_sigma *= s;

    Tensor x = gaussian(rng, {64, 2});
    Tensor g = critic_input_grad(critic, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double norm = std::hypot(g.at(i, 0), g.at(i, 1));
        CHECK(norm <= prod_sigma * (1.0 + 1e-2));
    }
}

TEST_CASE("spectral norm estimate after normalization is within 1e-3 of 1") {
    Rng rng(71);
    MlpCritic critic = make_critic(rng, 32);
    spectral_normalize(critic, 30);
    for (std::size_t l = 0; l < critic.net.layers.size(); ++l) {
        Tensor u = critic.sn_u[l], v = critic.sn_v[l];
        const double sigma = power_iteration(critic.net.layers[l].w, u, v, 1);
        CHECK(sigma == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    const Tensor orig = p;
    Tensor g({3});
    AdamState adam(AdamConfig{0.1, 0.0, 0.9, 1e-8});
    adam.step({&p}, {&g}, Direction::Descend);
    CHECK(p == orig);
}

TEST_CASE("adam: single step closed form at beta1=0") {
    const double lr = 0.05, eps = 1e-8, g = 0.7;
    Tensor p({1});
    Tensor grad = Tensor::full({1}, g);
    AdamState adam(AdamConfig{lr, 0.0, 0.9, eps});
    adam.step({&p}, {&grad}, Direction::Descend);
    CHECK(p[0] == doctest::Approx(-lr * g / (std::sqrt(g * g) + eps)).epsilon(1e-14));

    Tensor q({1});
    AdamState adam2(AdamConfig{lr, 0.0, 0.9, eps});
    adam2.step({&q}, {&grad}, Direction::Ascend);
    CHECK(q[0] == doctest::Approx(lr * g / (std::sqrt(g * g) + eps)).epsilon(1e-14));
}

TEST_CASE("adam: converges on a 1-d quadratic") {
    Tensor theta({1});
    AdamState adam(AdamConfig{0.1, 0.0, 0.9, 1e-8});
    for (int i = 0; i < 2000; ++i) {
        Tensor g = Tensor::full({1}, 2.0 * (theta[0] - 5.0));
        adam.step({&theta}, {&g}, Direction::Descend);
    }
    CHECK(std::abs(theta[0] - 5.0) < 1e-3);
}

TEST_CASE("adam: non-finite gradient names the parameter") {
    Tensor p({2}), good({2});
    Tensor bad({2});
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    AdamState adam;
    CHECK_THROWS_WITH_AS(adam.step({&p, &p}, {&good, &bad}, Direction::Descend),
                         doctest::Contains("parameter 1"), std::runtime_error);
}

TEST_CASE("adam: identical gradients give identical updates regardless of batch order") {
    // A batch of identical rows yields the same mean gradient however the
    // rows are ordered; the resulting update must then be bit-identical.
    Rng rng(17);
    Tensor g = gaussian(rng, {4});
    Tensor p1 = Tensor::from_data({4}, {1, 2, 3, 4});
    Tensor p2 = p1;
    AdamState a1(AdamConfig{0.01, 0.0, 0.9, 1e-8});
    AdamState a2(AdamConfig{0.01, 0.0, 0.9, 1e-8});
    for (int i = 0; i < 5; ++i) {
        a1.step({&p1}, {&g}, Direction::Descend);
        a2.step({&p2}, {&g}, Direction::Descend);
    }
    CHECK(p1 == p2);
}
