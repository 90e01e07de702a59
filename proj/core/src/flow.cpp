#include "foredif/flow.hpp"

#include <cmath>

#include "foredif/common.hpp"
#include "foredif/rng.hpp"

namespace foredif::flow {

void SamplerConfig::validate() const {
    FD_CHECK_T(ConfigError, steps >= 1, "sampler steps must be >= 1, got ", steps);
    FD_CHECK_T(ConfigError, samples_per_condition >= 1,
               "samples per condition must be >= 1, got ", samples_per_condition);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    FD_CHECK_T(ShapeError, a.shape() == b.shape(), op, ": shape mismatch ",
               shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

}  // namespace

Tensor interpolate(const Tensor& x0, const Tensor& eps, float t) {
    check_same_shape(x0, eps, "interpolate");
    FD_CHECK(t >= 0.0f && t <= 1.0f, "interpolation time must lie in [0,1], got ", t);
    if (t == 0.0f) return scale(x0, 1.0f);
    if (t == 1.0f) return scale(eps, 1.0f);
    return add(scale(x0, RectifiedSchedule::alpha(t)), scale(eps, RectifiedSchedule::sigma(t)));
}

Tensor velocity_target(const Tensor& x0, const Tensor& eps) {
    check_same_shape(x0, eps, "velocity_target");
    return sub(eps, x0);
}

Tensor reparameterize_xhat(const Tensor& x_t, float t, const Tensor& v) {
    check_same_shape(x_t, v, "reparameterize_xhat");
    if (t == 0.0f) return scale(x_t, 1.0f);  // degenerate endpoint, documented
    return sub(x_t, scale(v, t));
}

Tensor euler_sample_from(const VelocityFn& model, Tensor x, int steps) {
    FD_CHECK_T(ConfigError, steps >= 1, "sampler steps must be >= 1, got ", steps);
    const float dt = 1.0f / static_cast<float>(steps);
    for (int k = 0; k < steps; ++k) {
        float t = 1.0f - static_cast<float>(k) * dt;
        Tensor v = model(x, t);
        check_same_shape(x, v, "euler_sample");
        x = sub(x, scale(v, dt));
        if (!all_finite(x)) {
            raise("NaN encountered during sampling at step ", k, " (t=", t, ")");
        }
    }
    return x;
}

Tensor euler_sample(const VelocityFn& model, const Shape& sample_shape,
                    const SamplerConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Tensor x = Tensor::randn(sample_shape, rng);
    return euler_sample_from(model, std::move(x), cfg.steps);
}

Tensor single_step_predict(const VelocityFn& model, const Tensor& eps) {
    Tensor v = model(eps, 1.0f);
    check_same_shape(eps, v, "single_step_predict");
    return reparameterize_xhat(eps, 1.0f, v);
}

double bias_variance_residual(const BiasVarianceProblem& problem) {
    FD_CHECK(problem.dim >= 1, "bias-variance check needs dim >= 1");
    FD_CHECK(!problem.conditions.empty(), "bias-variance check needs at least one condition");
    FD_CHECK(!problem.eps_prob.empty(), "bias-variance check needs a non-empty eps grid");
    FD_CHECK(problem.predictor, "bias-variance check needs a predictor");

    const int d = problem.dim;
    const int n_eps = static_cast<int>(problem.eps_prob.size());
    double max_residual = 0.0;

    for (size_t ci = 0; ci < problem.conditions.size(); ++ci) {
        const auto& cond = problem.conditions[ci];
        FD_CHECK(!cond.x0_support.empty(), "empty x0 support for condition ", ci);
        FD_CHECK(cond.x0_support.size() == cond.x0_prob.size(),
                 "x0 support/probability size mismatch for condition ", ci);

        // predictor moments over the eps grid
        std::vector<double> pred_mean(static_cast<size_t>(d), 0.0);
        double pred_sq = 0.0;
        std::vector<std::vector<double>> preds(static_cast<size_t>(n_eps));
        for (int e = 0; e < n_eps; ++e) {
            preds[static_cast<size_t>(e)] = problem.predictor(static_cast<int>(ci), e);
            FD_CHECK(static_cast<int>(preds[static_cast<size_t>(e)].size()) == d,
                     "predictor returned wrong dimension");
            double w = problem.eps_prob[static_cast<size_t>(e)];
            double sq = 0.0;
            for (int k = 0; k < d; ++k) {
                double v = preds[static_cast<size_t>(e)][static_cast<size_t>(k)];
                pred_mean[static_cast<size_t>(k)] += w * v;
                sq += v * v;
            }
            pred_sq += w * sq;
        }
        double pred_mean_sq = 0.0;
        for (int k = 0; k < d; ++k) pred_mean_sq += pred_mean[static_cast<size_t>(k)] *
                                                    pred_mean[static_cast<size_t>(k)];
        double var_pred = pred_sq - pred_mean_sq;

        // conditional x0 moments
        std::vector<double> x0_mean(static_cast<size_t>(d), 0.0);
        double x0_sq = 0.0;
        for (size_t s = 0; s < cond.x0_support.size(); ++s) {
            double w = cond.x0_prob[s];
            double sq = 0.0;
            for (int k = 0; k < d; ++k) {
                double v = cond.x0_support[s][static_cast<size_t>(k)];
                x0_mean[static_cast<size_t>(k)] += w * v;
                sq += v * v;
            }
            x0_sq += w * sq;
        }
        double x0_mean_sq = 0.0;
        for (int k = 0; k < d; ++k) x0_mean_sq += x0_mean[static_cast<size_t>(k)] *
                                                  x0_mean[static_cast<size_t>(k)];
        double var_x0 = x0_sq - x0_mean_sq;

        // left side: exhaustive expected squared error
        double lhs = 0.0;
        for (int e = 0; e < n_eps; ++e) {
            for (size_t s = 0; s < cond.x0_support.size(); ++s) {
                double w = problem.eps_prob[static_cast<size_t>(e)] * cond.x0_prob[s];
                double sq = 0.0;
                for (int k = 0; k < d; ++k) {
                    double dlt = preds[static_cast<size_t>(e)][static_cast<size_t>(k)] -
                                 cond.x0_support[s][static_cast<size_t>(k)];
                    sq += dlt * dlt;
                }
                lhs += w * sq;
            }
        }

        // right side: squared bias + predictor variance + data variance
        double bias_sq = 0.0;
        for (int k = 0; k < d; ++k) {
            double dlt = pred_mean[static_cast<size_t>(k)] - x0_mean[static_cast<size_t>(k)];
            bias_sq += dlt * dlt;
        }
        double rhs = bias_sq + var_pred + var_x0;
        max_residual = std::max(max_residual, std::abs(lhs - rhs));
    }
    return max_residual;
}

}  // namespace foredif::flow
