#include "foredif/optimizer.hpp"

#include <cmath>

#include "foredif/common.hpp"

namespace foredif {

void AdamW::step(std::vector<Parameter>& params) {
    if (first_moment_.empty()) {
        first_moment_.resize(params.size());
        second_moment_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            size_t n = static_cast<size_t>(params[i].tensor.numel());
            first_moment_[i].assign(n, 0.0f);
            second_moment_[i].assign(n, 0.0f);
        }
    }
    FD_CHECK(first_moment_.size() == params.size(),
             "optimizer was initialized with a different parameter list");

    ++step_count_;
    const float bc1 = 1.0f - std::pow(opts_.beta1, static_cast<float>(step_count_));
    const float bc2 = 1.0f - std::pow(opts_.beta2, static_cast<float>(step_count_));

    for (size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (p.frozen) {
            p.tensor.zero_grad();
            continue;
        }
        FD_CHECK(p.tensor.has_grad(), "missing gradient for non-frozen parameter '",
                 p.name, "'");
        float* w = p.tensor.data();
        float* g = p.tensor.grad();
        float* m = first_moment_[i].data();
        float* v = second_moment_[i].data();
        const int64_t n = p.tensor.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = opts_.beta1 * m[j] + (1.0f - opts_.beta1) * g[j];
            v[j] = opts_.beta2 * v[j] + (1.0f - opts_.beta2) * g[j] * g[j];
            float mhat = m[j] / bc1;
            float vhat = v[j] / bc2;
            w[j] -= opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                                opts_.weight_decay * w[j]);
        }
        p.tensor.zero_grad();
    }
}

}  // namespace foredif
