#include <benchmark/benchmark.h>

#include "foredif/rng.hpp"
#include "foredif/tensor.hpp"

using namespace foredif;

static void MatmulSquare(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = Tensor::randn({n, n}, rng);
    Tensor b = Tensor::randn({n, n}, rng);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(MatmulSquare)->Arg(64)->Arg(128)->Arg(256)->Arg(384);

static void SoftmaxRows(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    Rng rng(2);
    Tensor x = Tensor::randn({rows, rows}, rng);
    for (auto _ : state) {
        Tensor y = softmax(x, -1);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(SoftmaxRows)->Arg(160)->Arg(320)->Arg(640);

static void LayerNormRows(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    Rng rng(3);
    Tensor x = Tensor::randn({rows, 384}, rng);
    Tensor g = Tensor::ones({384});
    Tensor b = Tensor::zeros({384});
    for (auto _ : state) {
        Tensor y = layer_norm(x, g, b);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(LayerNormRows)->Arg(160)->Arg(640);

static void BackwardMlp(benchmark::State& state) {
    const int tokens = static_cast<int>(state.range(0));
    Rng rng(4);
    Tensor x = Tensor::randn({tokens, 384}, rng);
    Tensor w1 = Tensor::randn({384, 1536}, rng, 0.02f, true);
    Tensor w2 = Tensor::randn({1536, 384}, rng, 0.02f, true);
    for (auto _ : state) {
        Tensor loss = mean(silu(matmul(silu(matmul(x, w1)), w2)));
        loss.backward();
        w1.zero_grad();
        w2.zero_grad();
        benchmark::DoNotOptimize(loss.data());
    }
}
BENCHMARK(BackwardMlp)->Arg(160)->Arg(640);

BENCHMARK_MAIN();
