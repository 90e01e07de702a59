#include <benchmark/benchmark.h>

#include "foredif/spectral.hpp"

using namespace foredif::spectral;

static void Fft2(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Field f = sample_initial_condition(1, n);
    for (auto _ : state) {
        Spectrum s = fft2(f);
        benchmark::DoNotOptimize(s.c.data());
    }
}
BENCHMARK(Fft2)->Arg(32)->Arg(64)->Arg(128);

static void SolverStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SimConfig cfg;
    cfg.n = n;
    cfg.dt = 1e-3;
    cfg.viscosity = 1e-3;
    Spectrum w = fft2(sample_initial_condition(2, n));
    Spectrum f = fft2(make_forcing(Forcing::F1, n));
    for (auto _ : state) {
        w = step(w, cfg, f);
        benchmark::DoNotOptimize(w.c.data());
    }
}
BENCHMARK(SolverStep)->Arg(32)->Arg(64);

static void InitialCondition(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    uint64_t seed = 0;
    for (auto _ : state) {
        Field f = sample_initial_condition(seed++, n);
        benchmark::DoNotOptimize(f.v.data());
    }
}
BENCHMARK(InitialCondition)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
