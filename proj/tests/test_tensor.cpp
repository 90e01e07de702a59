#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "foredif/common.hpp"

#include "foredif/optimizer.hpp"
#include "foredif/rng.hpp"
#include "foredif/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace foredif;
using foredif::testsupport::gradcheck;

namespace {

Tensor t2x2(float a, float b, float c, float d) {
    return Tensor::from({2, 2}, {a, b, c, d});
}

}  // namespace

TEST_CASE("matmul identity and dot product") {
    Tensor eye = t2x2(1, 0, 0, 1);
    Tensor m = t2x2(3, 4, 5, 6);
    Tensor r = matmul(eye, m);
    for (int i = 0; i < 4; ++i) CHECK(r.data()[i] == m.data()[i]);

    Tensor row = Tensor::from({1, 2}, {1, 2});
    Tensor col = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).item() == doctest::Approx(11.0f));
}

TEST_CASE("matmul shape errors report both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), ShapeError);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,2]"), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = Tensor::randn({4, 4}, rng, 1.0f, true);
        Tensor b = Tensor::randn({4, 4}, rng, 1.0f, true);
        auto loss = [&] { return sum(matmul(a, b)); };
        CHECK(gradcheck(loss, a, 16, 1e-3, trial) < 1e-3);
        CHECK(gradcheck(loss, b, 16, 1e-3, trial + 100) < 1e-3);
    }
}

TEST_CASE("batched matmul against per-slice results") {
    Rng rng(11);
    Tensor a = Tensor::randn({3, 2, 4}, rng);
    Tensor b = Tensor::randn({3, 4, 5}, rng);
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{3, 2, 5});
    for (int s = 0; s < 3; ++s) {
        Tensor as = reshape(slice(a, 0, s, s + 1), {2, 4});
        Tensor bs = reshape(slice(b, 0, s, s + 1), {4, 5});
        Tensor cs = matmul(as, bs);
        for (int i = 0; i < 10; ++i) {
            CHECK(c.data()[s * 10 + i] == doctest::Approx(cs.data()[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("softmax basics") {
    Tensor x = Tensor::from({2}, {0, 0});
    Tensor y = softmax(x, 0);
    CHECK(y.data()[0] == doctest::Approx(0.5f));
    CHECK(y.data()[1] == doctest::Approx(0.5f));

    Tensor big = Tensor::from({2}, {1000.0f, 0.0f});
    Tensor yb = softmax(big, 0);
    CHECK(yb.data()[0] == doctest::Approx(1.0f));
    CHECK(std::isfinite(yb.data()[1]));
    CHECK(yb.data()[1] == doctest::Approx(0.0f).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one for any finite input") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = Tensor::randn({4, 7}, rng, 10.0f);
        Tensor y = softmax(x, -1);
        for (int r = 0; r < 4; ++r) {
            double s = 0.0;
            for (int c = 0; c < 7; ++c) s += y.at({r, c});
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("softmax gradient matches finite differences") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = Tensor::randn({3, 5}, rng, 1.0f, true);
        Tensor w = Tensor::randn({3, 5}, rng);  // weights make the loss non-trivial
        auto loss = [&] { return sum(mul(softmax(x, -1), w)); };
        CHECK(gradcheck(loss, x, 15, 1e-3, trial) < 1e-3);
    }
}

TEST_CASE("layer_norm hand cases") {
    Tensor gain = Tensor::ones({3});
    Tensor bias = Tensor::zeros({3});

    Tensor constant = Tensor::from({1, 3}, {5, 5, 5});
    Tensor y = layer_norm(constant, gain, bias);
    for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(0.0f));

    Tensor two = Tensor::from({1, 2}, {1, 3});
    Tensor g2 = Tensor::ones({2});
    Tensor b2 = Tensor::zeros({2});
    Tensor y2 = layer_norm(two, g2, b2);
    CHECK(y2.data()[0] == doctest::Approx(-1.0f).epsilon(1e-4));
    CHECK(y2.data()[1] == doctest::Approx(1.0f).epsilon(1e-4));
}

TEST_CASE("layer_norm gradient matches finite differences") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = Tensor::randn({4, 6}, rng, 1.0f, true);
        Tensor gain = Tensor::randn({6}, rng, 0.5f, true);
        Tensor bias = Tensor::randn({6}, rng, 0.5f, true);
        Tensor w = Tensor::randn({4, 6}, rng);
        auto loss = [&] { return sum(mul(layer_norm(x, gain, bias), w)); };
        CHECK(gradcheck(loss, x, 24, 1e-3, trial) < 1e-3);
        CHECK(gradcheck(loss, gain, 6, 1e-3, trial + 50) < 1e-3);
        CHECK(gradcheck(loss, bias, 6, 1e-3, trial + 150) < 1e-3);
    }
}

TEST_CASE("activations at zero and their gradients") {
    Tensor zero = Tensor::scalar(0.0f);
    CHECK(silu(zero).item() == doctest::Approx(0.0f));
    CHECK(gelu(zero).item() == doctest::Approx(0.0f));

    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = Tensor::randn({20}, rng, 2.0f, true);
        auto loss_silu = [&] { return sum(silu(x)); };
        auto loss_gelu = [&] { return sum(gelu(x)); };
        CHECK(gradcheck(loss_silu, x, 20, 1e-3, trial) < 1e-3);
        CHECK(gradcheck(loss_gelu, x, 20, 1e-3, trial + 60) < 1e-3);
    }
}

TEST_CASE("backward fills ones for sum and analytic mse grad") {
    Tensor p = Tensor::from({4}, {1, -2, 3, 0.5f}, true);
    sum(p).backward();
    for (int i = 0; i < 4; ++i) CHECK(p.grad()[i] == doctest::Approx(1.0f));
    p.zero_grad();

    Tensor zero = Tensor::zeros({4});
    mse(p, zero).backward();
    for (int i = 0; i < 4; ++i) {
        CHECK(p.grad()[i] == doctest::Approx(2.0f * p.data()[i] / 4.0f));
    }
}

TEST_CASE("backward errors: non-scalar loss and double backward") {
    Tensor p = Tensor::from({2}, {1, 2}, true);
    Tensor v = scale(p, 2.0f);
    CHECK_THROWS_AS(v.backward(), Error);

    Tensor loss = sum(v);
    loss.backward();
    CHECK_THROWS_AS(loss.backward(), Error);
}

TEST_CASE("gradients of a tensor used by two branches accumulate") {
    Rng rng(17);
    Tensor x = Tensor::randn({5}, rng, 1.0f, true);

    // two-branch use
    Tensor y = add(silu(x), scale(x, 3.0f));
    sum(y).backward();
    std::vector<float> branched(x.grad(), x.grad() + 5);
    x.zero_grad();

    // fused single-expression equivalent
    auto fused = [&] { return add(sum(silu(x)), sum(scale(x, 3.0f))); };
    fused().backward();
    for (int i = 0; i < 5; ++i) CHECK(branched[i] == doctest::Approx(x.grad()[i]));
}

TEST_CASE("two-layer mlp composite gradient matches finite differences") {
    Rng rng(21);
    Tensor x = Tensor::randn({3, 8}, rng);
    Tensor w1 = Tensor::randn({8, 16}, rng, 0.3f, true);
    Tensor b1 = Tensor::zeros({16}, true);
    Tensor w2 = Tensor::randn({16, 4}, rng, 0.3f, true);
    Tensor b2 = Tensor::zeros({4}, true);
    Tensor target = Tensor::randn({3, 4}, rng);
    auto loss = [&] {
        Tensor h = silu(add(matmul(x, w1), b1));
        return mse(add(matmul(h, w2), b2), target);
    };
    CHECK(gradcheck(loss, w1, 24, 1e-3, 1) < 1e-3);
    CHECK(gradcheck(loss, b1, 16, 1e-3, 2) < 1e-3);
    CHECK(gradcheck(loss, w2, 24, 1e-3, 3) < 1e-3);
    CHECK(gradcheck(loss, b2, 4, 1e-3, 4) < 1e-3);
}

TEST_CASE("broadcast add/mul against explicit loops") {
    Rng rng(23);
    Tensor x = Tensor::randn({2, 3, 4}, rng, 1.0f, true);
    Tensor bias = Tensor::randn({4}, rng, 1.0f, true);
    Tensor y = add(x, bias);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 4; ++k)
                CHECK(y.at({i, j, k}) ==
                      doctest::Approx(x.at({i, j, k}) + bias.data()[k]));

    Tensor row = Tensor::randn({1, 4}, rng, 1.0f, true);
    Tensor m = Tensor::randn({3, 4}, rng, 1.0f, true);
    auto loss = [&] { return sum(mul(m, row)); };
    CHECK(gradcheck(loss, row, 4, 1e-3, 7) < 1e-3);
    CHECK(gradcheck(loss, m, 12, 1e-3, 8) < 1e-3);
}

TEST_CASE("slice, concat, permute, reshape round trips and grads") {
    Rng rng(29);
    Tensor x = Tensor::randn({4, 6}, rng, 1.0f, true);
    Tensor left = slice(x, 1, 0, 3);
    Tensor right = slice(x, 1, 3, 6);
    Tensor glued = concat({left, right}, 1);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(glued.data()[i] == x.data()[i]);

    Tensor p = permute(x, {1, 0});
    CHECK(p.shape() == Shape{6, 4});
    CHECK(p.at({2, 3}) == x.at({3, 2}));

    auto loss = [&] {
        Tensor a = permute(reshape(x, {2, 2, 6}), {1, 0, 2});
        return sum(mul(slice(a, 2, 1, 5), slice(a, 2, 1, 5)));
    };
    CHECK(gradcheck(loss, x, 24, 1e-3, 11) < 1e-3);
}

TEST_CASE("determinism: same seed and op sequence give identical bits") {
    auto run = [] {
        Rng rng(99);
        Tensor x = Tensor::randn({8, 8}, rng, 1.0f, true);
        Tensor w = Tensor::randn({8, 8}, rng, 0.2f, true);
        Tensor loss = mse(silu(matmul(x, w)), Tensor::zeros({8, 8}));
        loss.backward();
        std::vector<float> bits(w.grad(), w.grad() + w.numel());
        bits.push_back(loss.item());
        return bits;
    };
    auto a = run();
    auto b = run();
    CHECK(a == b);
}

TEST_CASE("adamw: frozen parameter is untouched bit for bit") {
    std::vector<Parameter> params;
    params.push_back({"w", Tensor::from({3}, {1.0f, -2.0f, 0.5f}, true), true});
    Tensor before = params[0].tensor.detach();

    Tensor loss = sum(params[0].tensor);
    loss.backward();
    AdamW opt(AdamW::Options{.lr = 0.1f});
    opt.step(params);
    for (int i = 0; i < 3; ++i) CHECK(params[0].tensor.data()[i] == before.data()[i]);
    // grads were still cleared
    CHECK(params[0].tensor.grad()[0] == 0.0f);
}

TEST_CASE("adamw: hand-checked single step") {
    std::vector<Parameter> params;
    params.push_back({"p", Tensor::from({1}, {1.0f}, true), false});
    sum(params[0].tensor).backward();  // grad = 1
    AdamW opt(AdamW::Options{.lr = 0.1f, .weight_decay = 0.0f});
    opt.step(params);
    // mhat = 1, vhat = 1: p = 1 - 0.1 * 1/(1 + eps)
    CHECK(params[0].tensor.item() == doctest::Approx(0.9f).epsilon(1e-5));
}

TEST_CASE("adamw: zero grad and zero weight decay change nothing") {
    std::vector<Parameter> params;
    params.push_back({"p", Tensor::from({2}, {0.7f, -0.3f}, true), false});
    sum(scale(params[0].tensor, 0.0f)).backward();  // grad exactly zero
    AdamW opt(AdamW::Options{.lr = 0.1f});
    opt.step(params);
    CHECK(params[0].tensor.data()[0] == 0.7f);
    CHECK(params[0].tensor.data()[1] == -0.3f);
}

TEST_CASE("adamw: missing grad on non-frozen parameter is an error") {
    std::vector<Parameter> params;
    params.push_back({"p", Tensor::from({1}, {1.0f}, true), false});
    AdamW opt;
    CHECK_THROWS_AS(opt.step(params), Error);
}

TEST_CASE("detach stops gradients") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor d = x.detach();
    Tensor loss = sum(mul(d, d));
    CHECK_FALSE(loss.requires_grad());
}
