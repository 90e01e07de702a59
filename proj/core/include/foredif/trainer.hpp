#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "foredif/dataset.hpp"
#include "foredif/model.hpp"

namespace foredif {

struct TrainConfig {
    Variant variant = Variant::Vanilla;
    int steps = 50000;
    int batch = 16;
    float lr = 1e-4f;  // constant, no warmup or schedule
    float weight_decay = 0.0f;
    uint64_t seed = 0;
    ArchConfig arch;
    int eval_every = 500;          // snapshot cadence for divergence recovery
    float t_floor = 1e-4f;         // numerical guard on the sampled diffusion time
    float test_fraction = 0.1f;    // held-out tail of every (viscosity, forcing) group
    std::string stage1_checkpoint; // required for stage-2 style variants
};

struct StepRecord {
    int step = 0;
    double wall_ms = 0.0;
    float loss = 0.0f;
};

struct TrainResult {
    ModelBundle model;
    std::vector<StepRecord> log;
    int stage = 1;  // 1 for deterministic/joint runs, 2 for frozen-stream runs
    bool diverged = false;
    /// SHA-256 of the predictive-stream parameters right after setup;
    /// frozen-stream variants must end with the same digest.
    std::string initial_predictive_digest;
};

/// Deterministic per-group split: the last ceil(fraction * group) of each
/// (viscosity, forcing) block is held out. Returns (train, test) indices.
std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& ds,
                                                            float test_fraction);

/// Positions into [0, count) for one training step under shuffled-epoch
/// sampling: each epoch is a fresh seeded permutation covering every
/// element exactly once; a batch may straddle two epochs.
std::vector<int> batch_indices(int count, int batch, uint64_t seed, int64_t step);

/// Runs one training variant to completion. Stage-2 style variants load
/// the stage-1 checkpoint, freeze the predictive stream and train a
/// freshly initialized generative stream. A non-finite loss restores the
/// last snapshot and returns with .diverged set.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset,
                  const std::function<void(const StepRecord&)>& on_step = nullptr);

}  // namespace foredif
