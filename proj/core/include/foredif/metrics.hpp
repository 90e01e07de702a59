#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foredif/dataset.hpp"
#include "foredif/flow.hpp"
#include "foredif/model.hpp"

namespace foredif::metrics {

/// 10*log10(peak^2 / MSE) over the flattened clip; a zero-MSE pair is
/// capped at 100 dB.
double psnr(const float* pred, const float* truth, int64_t count, double peak);

/// Mean local SSIM of one 2D field with an 11x11 Gaussian window
/// (sigma 1.5), C1=(0.01*peak)^2, C2=(0.03*peak)^2, valid-window centers.
/// Fields must be at least 11x11.
double ssim(const float* pred, const float* truth, int rows, int cols, double peak);

/// Root-mean-square error ||pred - truth||_2 / sqrt(count).
double l2_rms(const float* pred, const float* truth, int64_t count);

/// ||pred - truth||_2 / ||truth||_2; a zero-norm truth is an error.
double relative_l2(const float* pred, const float* truth, int64_t count);

struct ConsistencyStd {
    std::vector<double> per_condition;
    double dataset = 0.0;  // mean of the per-condition values
};

/// Population (1/N) standard deviation per condition, then the mean over
/// conditions. Needs N >= 2 samples per condition; bitwise-identical
/// samples give exactly zero.
ConsistencyStd consistency_std(const std::vector<std::vector<double>>& values);

/// Velocity field of a trained bundle with fixed conditioning tokens.
flow::VelocityFn bind_velocity(const ModelBundle& model, const Tensor& cond_tokens);

struct EvalConfig {
    int samples = 8;       // N draws per condition
    int euler_steps = 50;  // K
    uint64_t seed = 0;
    double peak = 0.0;     // <= 0 computes max-min of the ground truth
};

struct SampleMetrics {
    double l2 = 0.0;
    double rel_l2 = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct ConditionReport {
    int condition = 0;
    std::vector<SampleMetrics> samples;
};

struct MetricReport {
    double peak = 0.0;
    int samples = 0;
    int euler_steps = 0;
    std::vector<ConditionReport> conditions;
    SampleMetrics mean;  // over all N*C values
    SampleMetrics std;   // two-level consistency statistic
    SampleMetrics min;
    SampleMetrics max;
};

/// Draws N samples per held-out condition (Euler integration for
/// diffusion bundles, the deterministic prediction replicated for
/// stage-1 bundles), computes per-sample metrics and the consistency
/// aggregates. Conditions run in parallel with per-(condition, sample)
/// seeds; aggregation order is fixed.
MetricReport evaluate_run(const ModelBundle& model, const Dataset& dataset,
                          const std::vector<int>& condition_idx, const EvalConfig& cfg);

void write_report_csv(const MetricReport& report, const std::string& path,
                      const std::string& checkpoint_hash);

struct LemmaReport {
    double single_step_mse = 0.0;   // diffusion probed once from pure noise at t=1
    double deterministic_mse = 0.0;
    double ratio = 0.0;
    int trials = 0;
    int conditions = 0;
};

/// Compares the one-step t=1 prediction error of a diffusion bundle
/// against a deterministic bundle on the same conditions. A bundle
/// without a generative stream is evaluated through its deterministic
/// prediction on both paths, making the two losses bitwise equal.
LemmaReport lemma_check(const ModelBundle& diffusion, const ModelBundle& deterministic,
                        const Dataset& dataset, const std::vector<int>& condition_idx,
                        int trials, uint64_t seed);

}  // namespace foredif::metrics
