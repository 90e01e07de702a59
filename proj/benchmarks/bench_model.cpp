#include <benchmark/benchmark.h>

#include "foredif/flow.hpp"
#include "foredif/model.hpp"
#include "foredif/rng.hpp"

using namespace foredif;

namespace {

ArchConfig bench_arch(int hidden, int vit, int dit) {
    ArchConfig a;
    a.hidden = hidden;
    a.heads = hidden / 64 > 0 ? hidden / 64 : 2;
    a.vit_blocks = vit;
    a.dit_blocks = dit;
    a.patch = 4;
    a.grid = 32;
    a.frames_obs = 10;
    a.frames_pred = 10;
    return a;
}

struct Fixture {
    ModelBundle model;
    ConditionInput cond;
    Tensor x_t, target;

    explicit Fixture(const ArchConfig& a) {
        model = build_model(a, Variant::ForeDiffZero, 7);
        Rng rng(8);
        std::vector<float> frames(static_cast<size_t>(20) * a.grid * a.grid);
        for (auto& v : frames) v = static_cast<float>(rng.normal());
        cond = build_condition(a, frames.data(), 20);
        Tensor x0 = target_frames(a, frames.data(), 20);
        Tensor eps = Tensor::randn(x0.shape(), rng);
        x_t = flow::interpolate(x0, eps, 0.5f);
        target = flow::velocity_target(x0, eps);
    }
};

}  // namespace

static void VelocityForward(benchmark::State& state) {
    Fixture fx(bench_arch(static_cast<int>(state.range(0)), 2, 3));
    NoGradGuard ng;
    for (auto _ : state) {
        Tensor v = fx.model.velocity(fx.x_t, fx.model.conditioning(fx.cond, true), 0.5f);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(VelocityForward)->Arg(48)->Arg(128)->Arg(384)->Unit(benchmark::kMillisecond);

static void TrainStepOneSample(benchmark::State& state) {
    Fixture fx(bench_arch(static_cast<int>(state.range(0)), 2, 3));
    for (auto _ : state) {
        Tensor g = fx.model.conditioning(fx.cond, false);
        Tensor v = fx.model.velocity(fx.x_t, g, 0.5f);
        Tensor loss = mse(v, fx.target);
        loss.backward();
        for (auto& p : fx.model.params) p.tensor.zero_grad();
        benchmark::DoNotOptimize(loss.data());
    }
}
BENCHMARK(TrainStepOneSample)->Arg(48)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
