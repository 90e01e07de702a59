#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "foredif/tensor.hpp"

namespace foredif::flow {

/// Rectified interpolation coefficients: alpha(t) = 1 - t, sigma(t) = t.
struct RectifiedSchedule {
    static float alpha(float t) { return 1.0f - t; }
    static float sigma(float t) { return t; }
};

struct SamplerConfig {
    int steps = 50;                  // Euler steps, uniform dt = 1/steps
    uint64_t seed = 0;
    int samples_per_condition = 8;

    void validate() const;
};

/// x_t = (1 - t) * x0 + t * eps, t in [0, 1].
Tensor interpolate(const Tensor& x0, const Tensor& eps, float t);

/// Regression target of the flow-matching loss: -x0 + eps (t-independent).
Tensor velocity_target(const Tensor& x0, const Tensor& eps);

/// xhat = x_t - t * v. With the exact target velocity this recovers x0
/// for every t. t = 0 degenerates to returning x_t unchanged.
Tensor reparameterize_xhat(const Tensor& x_t, float t, const Tensor& v);

/// Learned velocity field with the condition already bound.
using VelocityFn = std::function<Tensor(const Tensor& x, float t)>;

/// Integrates x <- x - v(x, t) * dt from t = 1 down to 0 on a uniform
/// grid, starting from seeded standard normal noise. Throws on NaN with
/// the offending step index.
Tensor euler_sample(const VelocityFn& model, const Shape& sample_shape,
                    const SamplerConfig& cfg);

/// Same integration from caller-provided initial noise.
Tensor euler_sample_from(const VelocityFn& model, Tensor x, int steps);

/// One-step probe from pure noise: xhat = eps - v(eps, 1).
Tensor single_step_predict(const VelocityFn& model, const Tensor& eps);

/// Enumerable joint distribution over (x0, y) with a finite noise grid,
/// for checking E||xhat - x0||^2 = ||E[xhat] - E[x0|y]||^2
///                                 + Var_eps[xhat] + Var[x0|y]  per y.
struct BiasVarianceProblem {
    int dim = 1;

    struct Condition {
        std::vector<std::vector<double>> x0_support;  // points of length dim
        std::vector<double> x0_prob;                  // sums to 1
    };
    std::vector<Condition> conditions;
    std::vector<double> eps_prob;  // weights of the finite eps grid, sums to 1

    /// predictor(condition_index, eps_index) -> point of length dim
    std::function<std::vector<double>(int, int)> predictor;
};

/// Exhaustively evaluates both sides of the decomposition; returns the
/// maximum absolute residual over conditions.
double bias_variance_residual(const BiasVarianceProblem& problem);

}  // namespace foredif::flow
