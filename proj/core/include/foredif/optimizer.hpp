#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foredif/tensor.hpp"

namespace foredif {

/// A named trainable tensor. Frozen parameters never receive updates.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

/// Adam with bias correction and decoupled weight decay.
/// Moment buffers are lazily sized to the parameter list on first step;
/// the parameter list must keep its order across steps.
class AdamW {
public:
    struct Options {
        float lr = 1e-4f;
        float beta1 = 0.9f;
        float beta2 = 0.999f;
        float eps = 1e-8f;
        float weight_decay = 0.0f;
    };

    AdamW() = default;
    explicit AdamW(const Options& opts) : opts_(opts) {}

    const Options& options() const { return opts_; }
    void set_lr(float lr) { opts_.lr = lr; }
    int64_t step_count() const { return step_count_; }

    /// Applies one update to every non-frozen parameter, then zeroes all
    /// gradients (frozen ones included). A non-frozen parameter without a
    /// populated gradient is an error.
    void step(std::vector<Parameter>& params);

private:
    Options opts_;
    int64_t step_count_ = 0;
    std::vector<std::vector<float>> first_moment_;
    std::vector<std::vector<float>> second_moment_;
};

}  // namespace foredif
