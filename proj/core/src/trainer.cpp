#include "foredif/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "foredif/checkpoint.hpp"
#include "foredif/common.hpp"
#include "foredif/flow.hpp"
#include "foredif/rng.hpp"

namespace foredif {

std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& ds,
                                                            float test_fraction) {
    FD_CHECK_T(ConfigError, test_fraction >= 0.0f && test_fraction < 1.0f,
               "test_fraction must lie in [0,1), got ", test_fraction);
    std::map<std::pair<double, int>, std::vector<int>> groups;
    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        const auto& t = ds.trajectories[i];
        groups[{t.viscosity, t.forcing_variant}].push_back(static_cast<int>(i));
    }
    std::vector<int> train, test;
    for (auto& [key, members] : groups) {
        // guard against float fuzz pushing an exact fraction over the ceil
        double want = test_fraction * static_cast<double>(members.size());
        int held = static_cast<int>(std::ceil(want - 1e-6 * std::max(1.0, want)));
        held = std::min<int>(held, static_cast<int>(members.size()));
        int split = static_cast<int>(members.size()) - held;
        for (int j = 0; j < split; ++j) train.push_back(members[static_cast<size_t>(j)]);
        for (size_t j = static_cast<size_t>(split); j < members.size(); ++j) {
            test.push_back(members[j]);
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

std::vector<int> batch_indices(int count, int batch, uint64_t seed, int64_t step) {
    FD_CHECK(count > 0 && batch > 0, "batch_indices needs positive count and batch");
    auto permutation = [&](int64_t epoch) {
        std::vector<int> perm(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) perm[static_cast<size_t>(i)] = i;
        Rng rng(derive_seed(seed, 0x5e9f, static_cast<uint64_t>(epoch)));
        for (int i = count - 1; i > 0; --i) {
            int j = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(i + 1)));
            std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
        }
        return perm;
    };
    std::vector<int> out;
    out.reserve(static_cast<size_t>(batch));
    int64_t cursor = step * batch;
    int64_t epoch = cursor / count;
    std::vector<int> perm = permutation(epoch);
    for (int b = 0; b < batch; ++b) {
        int64_t pos = cursor + b;
        if (pos / count != epoch) {
            epoch = pos / count;
            perm = permutation(epoch);
        }
        out.push_back(perm[static_cast<size_t>(pos % count)]);
    }
    return out;
}

namespace {

bool frozen_stream_variant(Variant v) {
    return v == Variant::ForeDiffStage2 || v == Variant::ForeDiffPredHeadAblation;
}

ModelBundle setup_model(const TrainConfig& cfg) {
    ArchConfig arch = cfg.arch;
    if (cfg.variant == Variant::VanillaExtended) {
        arch.vit_blocks = 0;
        arch.dit_blocks = 18;
    }
    if (!frozen_stream_variant(cfg.variant)) {
        return build_model(arch, cfg.variant, cfg.seed);
    }

    FD_CHECK_T(ConfigError, !cfg.stage1_checkpoint.empty(), variant_name(cfg.variant),
               " requires a stage-1 checkpoint");
    ModelBundle stage1 = load_checkpoint(cfg.stage1_checkpoint);
    FD_CHECK_T(CheckpointError, stage1.variant == Variant::ForeDiffStage1,
               "expected a foredif_stage1 checkpoint, got ",
               variant_name(stage1.variant));
    FD_CHECK_T(CheckpointError, stage1.arch == arch,
               "stage-1 checkpoint architecture does not match the requested config");

    ModelBundle model = build_model(arch, cfg.variant, cfg.seed);
    for (auto& p : model.params) {
        if (p.name.rfind("pred.", 0) != 0) continue;
        const Parameter* src = stage1.find_param(p.name);
        FD_CHECK_T(CheckpointError, src != nullptr,
                   "stage-1 checkpoint missing parameter '", p.name, "'");
        std::copy(src->tensor.data(), src->tensor.data() + src->tensor.numel(),
                  p.tensor.data());
    }
    model.freeze_predictive();
    return model;
}

struct Snapshot {
    std::vector<std::vector<float>> values;

    void capture(const ModelBundle& m) {
        values.clear();
        values.reserve(m.params.size());
        for (const auto& p : m.params) {
            values.emplace_back(p.tensor.data(), p.tensor.data() + p.tensor.numel());
        }
    }

    void restore(ModelBundle& m) const {
        for (size_t i = 0; i < m.params.size(); ++i) {
            std::copy(values[i].begin(), values[i].end(), m.params[i].tensor.data());
        }
    }
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& dataset,
                  const std::function<void(const StepRecord&)>& on_step) {
    FD_CHECK_T(ConfigError, cfg.steps >= 1, "steps must be >= 1");
    FD_CHECK_T(ConfigError, cfg.batch >= 1, "batch must be >= 1");
    FD_CHECK_T(ConfigError, !dataset.trajectories.empty(), "training dataset is empty");
    FD_CHECK_T(ConfigError, static_cast<int>(dataset.n) == cfg.arch.grid,
               "dataset resolution ", dataset.n, " does not match model grid ",
               cfg.arch.grid);
    FD_CHECK_T(ConfigError,
               static_cast<int>(dataset.frames) >= cfg.arch.frames_obs + cfg.arch.frames_pred,
               "dataset frames ", dataset.frames, " shorter than O+S=",
               cfg.arch.frames_obs + cfg.arch.frames_pred);

    TrainResult result;
    result.model = setup_model(cfg);
    result.stage = frozen_stream_variant(cfg.variant) ? 2 : 1;
    result.initial_predictive_digest = result.model.predictive_digest();
    ModelBundle& model = result.model;

    auto [train_idx, test_idx] = split_dataset(dataset, cfg.test_fraction);
    FD_CHECK(!train_idx.empty(), "training split is empty");

    AdamW::Options opts;
    opts.lr = cfg.lr;
    opts.weight_decay = cfg.weight_decay;
    AdamW optimizer(opts);

    const bool deterministic = cfg.variant == Variant::ForeDiffStage1;
    const bool stop_gradient = frozen_stream_variant(cfg.variant);
    const float inv_batch = 1.0f / static_cast<float>(cfg.batch);

    Snapshot snapshot;
    snapshot.capture(model);

    auto t0 = std::chrono::steady_clock::now();
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> batch =
            batch_indices(static_cast<int>(train_idx.size()), cfg.batch, cfg.seed, step);
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& traj =
                dataset.trajectories[static_cast<size_t>(train_idx[static_cast<size_t>(batch[static_cast<size_t>(b)])])];
            ConditionInput cond = build_condition(model.arch, traj.frames.data(),
                                                  static_cast<int>(dataset.frames));
            Tensor x0 = target_frames(model.arch, traj.frames.data(),
                                      static_cast<int>(dataset.frames));
            Tensor loss;
            if (deterministic) {
                loss = mse(model.predict(cond), x0);
            } else {
                Rng draw(derive_seed(cfg.seed, 0xd1f, static_cast<uint64_t>(step),
                                     static_cast<uint64_t>(b)));
                Tensor eps = Tensor::randn(x0.shape(), draw);
                float t = static_cast<float>(draw.uniform(cfg.t_floor, 1.0));
                Tensor x_t = flow::interpolate(x0, eps, t);
                Tensor target = flow::velocity_target(x0, eps);
                Tensor g = model.conditioning(cond, stop_gradient);
                Tensor v = model.velocity(x_t, g, t);
                loss = mse(v, target);
            }
            loss_acc += static_cast<double>(loss.item());
            scale(loss, inv_batch).backward();
        }
        float step_loss = static_cast<float>(loss_acc * inv_batch);

        StepRecord rec;
        rec.step = step;
        rec.loss = step_loss;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

        if (!std::isfinite(step_loss)) {
            snapshot.restore(model);
            result.diverged = true;
            result.log.push_back(rec);
            if (on_step) on_step(rec);
            return result;
        }

        optimizer.step(model.params);
        result.log.push_back(rec);
        if (on_step) on_step(rec);
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
            snapshot.capture(model);
        }
    }
    return result;
}

}  // namespace foredif
