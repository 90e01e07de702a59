#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace foredif {

class Rng;

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense float32 tensor with reverse-mode automatic differentiation.
///
/// Copies are shallow: they share the buffer, the gradient and the
/// recorded graph node. Values are immutable once an op has consumed
/// the tensor; gradient buffers are the only thing mutated afterwards.
/// Calling backward() on a scalar loss populates .grad() on every
/// reachable tensor with requires_grad set, then releases the graph.
class Tensor {
public:
    struct Impl;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0f); }
    static Tensor scalar(float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f,
                        bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    int dim(int axis) const;  // negative axis counts from the back
    int64_t numel() const;

    float* data();
    const float* data() const;
    float item() const;  // scalar tensors only
    float at(std::initializer_list<int> idx) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    float* grad();
    const float* grad() const;
    void zero_grad();

    /// Reverse-mode pass from this scalar. Gradients of tensors used in
    /// several places accumulate. The graph is released afterwards; a
    /// second backward without a fresh forward is an error.
    void backward();

    /// Same values, no graph edge: gradients stop here.
    Tensor detach() const;

    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

/// Scoped guard that disables graph recording (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Elementwise binary ops with numpy-style right-aligned broadcasting,
// restricted to the patterns the model needs (matching extents or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, float c);
Tensor add_scalar(const Tensor& x, float c);

/// Batched matrix product. a is [..., m, k]; b is either [k, n] (shared
/// right operand) or [..., k, n] with identical leading extents.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose_last(const Tensor& x);                      // swaps the last two axes
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice(const Tensor& x, int axis, int start, int end);  // [start, end)
Tensor concat(const std::vector<Tensor>& parts, int axis);

Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

enum class Activation { Silu, Gelu };
Tensor activation(const Tensor& x, Activation kind);
inline Tensor silu(const Tensor& x) { return activation(x, Activation::Silu); }
inline Tensor gelu(const Tensor& x) { return activation(x, Activation::Gelu); }

/// mean((a - b)^2) over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, float c) { return scale(a, c); }
inline Tensor operator*(float c, const Tensor& a) { return scale(a, c); }

bool all_finite(const Tensor& x);

}  // namespace foredif
