#include "foredif/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "foredif/common.hpp"
#include "foredif/rng.hpp"

namespace foredif {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

struct Tensor::Impl {
    Shape shape;
    std::vector<float> data;
    std::unique_ptr<std::vector<float>> grad;
    bool requires_grad = false;
    bool backward_done = false;

    std::vector<std::shared_ptr<Impl>> parents;
    std::function<void(Impl&)> backprop;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

namespace {

thread_local bool g_grad_enabled = true;

using Impl = Tensor::Impl;

std::shared_ptr<Impl> make_impl(Shape shape) {
    auto impl = std::make_shared<Impl>();
    int64_t n = shape_numel(shape);
    FD_CHECK_T(ShapeError, n >= 0, "negative extent in shape ", shape_str(shape));
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<size_t>(n), 0.0f);
    return impl;
}

void ensure_grad(Impl& impl) {
    if (!impl.grad) {
        impl.grad = std::make_unique<std::vector<float>>(impl.data.size(), 0.0f);
    }
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
    for (const auto& t : inputs) {
        if (t.defined() && t.requires_grad()) return true;
    }
    return false;
}

void check_finite_debug(const Impl& impl, const char* op) {
#ifndef NDEBUG
    for (float v : impl.data) {
        if (!std::isfinite(v)) {
            raise("non-finite value produced by op '", op, "'");
        }
    }
#else
    (void)impl;
    (void)op;
#endif
}

/// Attaches the graph edge if recording is on and any input needs it.
Tensor finish_op(std::shared_ptr<Impl> out, std::vector<Tensor> inputs,
                 std::function<void(Impl&)> backprop, const char* op) {
    check_finite_debug(*out, op);
    if (g_grad_enabled && any_requires_grad(inputs)) {
        out->requires_grad = true;
        out->parents.reserve(inputs.size());
        for (auto& t : inputs) out->parents.push_back(t.impl());
        out->backprop = std::move(backprop);
    }
    return Tensor(std::move(out));
}

int normalize_axis(int axis, int rank) {
    int a = axis < 0 ? axis + rank : axis;
    FD_CHECK_T(ShapeError, a >= 0 && a < rank, "axis ", axis, " out of range for rank ",
               rank);
    return a;
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
    std::vector<int64_t> strides(shape.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        strides[static_cast<size_t>(i)] = acc;
        acc *= shape[static_cast<size_t>(i)];
    }
    return strides;
}

struct Broadcast {
    Shape out;
    std::vector<int64_t> stride_a;  // per output axis, 0 where a broadcasts
    std::vector<int64_t> stride_b;
    bool same = false;
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        bc.same = true;
        return bc;
    }
    int ra = static_cast<int>(a.size());
    int rb = static_cast<int>(b.size());
    int r = std::max(ra, rb);
    bc.out.resize(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        int da = i < r - ra ? 1 : a[static_cast<size_t>(i - (r - ra))];
        int db = i < r - rb ? 1 : b[static_cast<size_t>(i - (r - rb))];
        FD_CHECK_T(ShapeError, da == db || da == 1 || db == 1,
                   "incompatible shapes for elementwise op: ", shape_str(a), " vs ",
                   shape_str(b));
        bc.out[static_cast<size_t>(i)] = std::max(da, db);
    }
    auto strides_for = [&](const Shape& s) {
        auto native = row_major_strides(s);
        int rs = static_cast<int>(s.size());
        std::vector<int64_t> out(static_cast<size_t>(r), 0);
        for (int i = 0; i < rs; ++i) {
            int oi = i + (r - rs);
            out[static_cast<size_t>(oi)] =
                s[static_cast<size_t>(i)] == 1 ? 0 : native[static_cast<size_t>(i)];
        }
        return out;
    };
    bc.stride_a = strides_for(a);
    bc.stride_b = strides_for(b);
    return bc;
}

/// Walks the output index space calling f(out_off, a_off, b_off).
template <class F>
void broadcast_loop(const Broadcast& bc, F&& f) {
    int64_t total = shape_numel(bc.out);
    if (bc.same) {
        for (int64_t i = 0; i < total; ++i) f(i, i, i);
        return;
    }
    int r = static_cast<int>(bc.out.size());
    std::vector<int> idx(static_cast<size_t>(r), 0);
    int64_t oa = 0, ob = 0;
    for (int64_t o = 0; o < total; ++o) {
        f(o, oa, ob);
        for (int ax = r - 1; ax >= 0; --ax) {
            auto u = static_cast<size_t>(ax);
            ++idx[u];
            oa += bc.stride_a[u];
            ob += bc.stride_b[u];
            if (idx[u] < bc.out[u]) break;
            idx[u] = 0;
            oa -= bc.stride_a[u] * bc.out[u];
            ob -= bc.stride_b[u] * bc.out[u];
        }
    }
}

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    FD_CHECK(a.defined() && b.defined(), "undefined tensor passed to ", name);
    Broadcast bc = broadcast_shapes(a.shape(), b.shape());
    auto out = make_impl(bc.out);
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out->data.data();
    switch (kind) {
        case BinKind::Add:
            broadcast_loop(bc, [&](int64_t o, int64_t ia, int64_t ib) { po[o] = pa[ia] + pb[ib]; });
            break;
        case BinKind::Sub:
            broadcast_loop(bc, [&](int64_t o, int64_t ia, int64_t ib) { po[o] = pa[ia] - pb[ib]; });
            break;
        case BinKind::Mul:
            broadcast_loop(bc, [&](int64_t o, int64_t ia, int64_t ib) { po[o] = pa[ia] * pb[ib]; });
            break;
        case BinKind::Div:
            broadcast_loop(bc, [&](int64_t o, int64_t ia, int64_t ib) { po[o] = pa[ia] / pb[ib]; });
            break;
    }
    return finish_op(
        out, {a, b},
        [bc, kind](Impl& self) {
            Impl& ia = *self.parents[0];
            Impl& ib = *self.parents[1];
            const float* go = self.grad->data();
            const float* pa = ia.data.data();
            const float* pb = ib.data.data();
            const float* py = self.data.data();
            float* ga = nullptr;
            float* gb = nullptr;
            if (ia.requires_grad) {
                ensure_grad(ia);
                ga = ia.grad->data();
            }
            if (ib.requires_grad) {
                ensure_grad(ib);
                gb = ib.grad->data();
            }
            broadcast_loop(bc, [&](int64_t o, int64_t oa, int64_t ob) {
                float g = go[o];
                switch (kind) {
                    case BinKind::Add:
                        if (ga) ga[oa] += g;
                        if (gb) gb[ob] += g;
                        break;
                    case BinKind::Sub:
                        if (ga) ga[oa] += g;
                        if (gb) gb[ob] -= g;
                        break;
                    case BinKind::Mul:
                        if (ga) ga[oa] += g * pb[ob];
                        if (gb) gb[ob] += g * pa[oa];
                        break;
                    case BinKind::Div:
                        if (ga) ga[oa] += g / pb[ob];
                        if (gb) gb[ob] -= g * py[o] / pb[ob];
                        break;
                }
            });
        },
        name);
}

using EMatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EMatCMap =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

// ---------------------------------------------------------------------------
// Tensor basics

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto impl = make_impl(std::move(shape));
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto impl = make_impl(std::move(shape));
    std::fill(impl->data.begin(), impl->data.end(), value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    FD_CHECK_T(ShapeError,
               shape_numel(shape) == static_cast<int64_t>(values.size()),
               "value count ", values.size(), " does not match shape ", shape_str(shape));
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
    auto impl = make_impl(std::move(shape));
    for (auto& v : impl->data) v = static_cast<float>(rng.normal()) * stddev;
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const {
    FD_CHECK(defined(), "shape() on undefined tensor");
    return impl_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int axis) const {
    int a = normalize_axis(axis, rank());
    return impl_->shape[static_cast<size_t>(a)];
}

int64_t Tensor::numel() const {
    FD_CHECK(defined(), "numel() on undefined tensor");
    return impl_->numel();
}

float* Tensor::data() {
    FD_CHECK(defined(), "data() on undefined tensor");
    return impl_->data.data();
}

const float* Tensor::data() const {
    FD_CHECK(defined(), "data() on undefined tensor");
    return impl_->data.data();
}

float Tensor::item() const {
    FD_CHECK_T(ShapeError, defined() && numel() == 1, "item() requires a scalar tensor");
    return impl_->data[0];
}

float Tensor::at(std::initializer_list<int> idx) const {
    FD_CHECK(defined(), "at() on undefined tensor");
    FD_CHECK_T(ShapeError, static_cast<int>(idx.size()) == rank(), "at(): index rank ",
               idx.size(), " vs tensor rank ", rank());
    auto strides = row_major_strides(impl_->shape);
    int64_t off = 0;
    int i = 0;
    for (int v : idx) {
        FD_CHECK_T(ShapeError, v >= 0 && v < impl_->shape[static_cast<size_t>(i)],
                   "at(): index out of bounds");
        off += strides[static_cast<size_t>(i)] * v;
        ++i;
    }
    return impl_->data[static_cast<size_t>(off)];
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    FD_CHECK(defined(), "set_requires_grad() on undefined tensor");
    impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return defined() && impl_->grad != nullptr; }

float* Tensor::grad() {
    FD_CHECK(has_grad(), "grad() on tensor without gradient buffer");
    return impl_->grad->data();
}

const float* Tensor::grad() const {
    FD_CHECK(has_grad(), "grad() on tensor without gradient buffer");
    return impl_->grad->data();
}

void Tensor::zero_grad() {
    if (has_grad()) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0f);
}

void Tensor::backward() {
    FD_CHECK(defined(), "backward() on undefined tensor");
    FD_CHECK(numel() == 1, "backward() requires a scalar loss, got shape ",
             shape_str(impl_->shape));
    FD_CHECK(impl_->requires_grad, "backward() on a tensor that does not require grad");
    FD_CHECK(!impl_->backward_done,
             "second backward() without a fresh forward pass; the graph was released");

    // reverse post-order over nodes that still carry a backprop closure
    std::vector<std::shared_ptr<Impl>> order;
    std::unordered_set<Impl*> visited;
    struct Frame {
        std::shared_ptr<Impl> node;
        size_t next_parent = 0;
    };
    std::vector<Frame> stack;
    if (impl_->backprop) {
        stack.push_back({impl_, 0});
        visited.insert(impl_.get());
    }
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            auto& p = f.node->parents[f.next_parent++];
            if (p->backprop && p->requires_grad && !visited.count(p.get())) {
                visited.insert(p.get());
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    ensure_grad(*impl_);
    (*impl_->grad)[0] += 1.0f;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Impl& node = **it;
        ensure_grad(node);
        node.backprop(node);
    }
    for (auto& node : order) {
        node->backprop = nullptr;
        node->parents.clear();
    }
    impl_->backward_done = true;
}

Tensor Tensor::detach() const {
    FD_CHECK(defined(), "detach() on undefined tensor");
    auto impl = std::make_shared<Impl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = false;
    return Tensor(std::move(impl));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Div, "div"); }

Tensor scale(const Tensor& x, float c) {
    FD_CHECK(x.defined(), "scale() on undefined tensor");
    auto out = make_impl(x.shape());
    const float* px = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) out->data[static_cast<size_t>(i)] = px[i] * c;
    return finish_op(
        out, {x},
        [c](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            float* gx = ix.grad->data();
            for (size_t i = 0; i < self.data.size(); ++i) gx[i] += go[i] * c;
        },
        "scale");
}

Tensor add_scalar(const Tensor& x, float c) {
    FD_CHECK(x.defined(), "add_scalar() on undefined tensor");
    auto out = make_impl(x.shape());
    const float* px = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) out->data[static_cast<size_t>(i)] = px[i] + c;
    return finish_op(
        out, {x},
        [](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            float* gx = ix.grad->data();
            for (size_t i = 0; i < self.data.size(); ++i) gx[i] += go[i];
        },
        "add_scalar");
}

// ---------------------------------------------------------------------------
// Matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    FD_CHECK(a.defined() && b.defined(), "undefined tensor passed to matmul");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    FD_CHECK_T(ShapeError, sa.size() >= 2 && sb.size() >= 2,
               "matmul requires rank >= 2 operands: ", shape_str(sa), " vs ", shape_str(sb));
    const int m = sa[sa.size() - 2];
    const int k = sa[sa.size() - 1];
    const int kb = sb[sb.size() - 2];
    const int n = sb[sb.size() - 1];
    FD_CHECK_T(ShapeError, k == kb, "matmul inner extents mismatch: ", shape_str(sa),
               " vs ", shape_str(sb));
    const bool shared_rhs = sb.size() == 2;
    if (!shared_rhs) {
        FD_CHECK_T(ShapeError,
                   sa.size() == sb.size() &&
                       std::equal(sa.begin(), sa.end() - 2, sb.begin()),
                   "matmul batch extents mismatch: ", shape_str(sa), " vs ", shape_str(sb));
    }
    Shape out_shape(sa.begin(), sa.end() - 2);
    int64_t batch = shape_numel(out_shape);
    out_shape.push_back(m);
    out_shape.push_back(n);
    auto out = make_impl(out_shape);

    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out->data.data();
    if (shared_rhs) {
        EMatCMap A(pa, batch * m, k);
        EMatCMap B(pb, k, n);
        EMatMap C(po, batch * m, n);
        C.noalias() = A * B;
    } else {
        for (int64_t i = 0; i < batch; ++i) {
            EMatCMap A(pa + i * m * k, m, k);
            EMatCMap B(pb + i * static_cast<int64_t>(k) * n, k, n);
            EMatMap C(po + i * static_cast<int64_t>(m) * n, m, n);
            C.noalias() = A * B;
        }
    }

    return finish_op(
        out, {a, b},
        [m, k, n, batch, shared_rhs](Impl& self) {
            Impl& ia = *self.parents[0];
            Impl& ib = *self.parents[1];
            const float* go = self.grad->data();
            const float* pa = ia.data.data();
            const float* pb = ib.data.data();
            if (ia.requires_grad) {
                ensure_grad(ia);
                float* ga = ia.grad->data();
                if (shared_rhs) {
                    EMatCMap dC(go, batch * m, n);
                    EMatCMap B(pb, k, n);
                    EMatMap dA(ga, batch * m, k);
                    dA.noalias() += dC * B.transpose();
                } else {
                    for (int64_t i = 0; i < batch; ++i) {
                        EMatCMap dC(go + i * static_cast<int64_t>(m) * n, m, n);
                        EMatCMap B(pb + i * static_cast<int64_t>(k) * n, k, n);
                        EMatMap dA(ga + i * static_cast<int64_t>(m) * k, m, k);
                        dA.noalias() += dC * B.transpose();
                    }
                }
            }
            if (ib.requires_grad) {
                ensure_grad(ib);
                float* gb = ib.grad->data();
                if (shared_rhs) {
                    EMatCMap A(pa, batch * m, k);
                    EMatCMap dC(go, batch * m, n);
                    EMatMap dB(gb, k, n);
                    dB.noalias() += A.transpose() * dC;
                } else {
                    for (int64_t i = 0; i < batch; ++i) {
                        EMatCMap A(pa + i * static_cast<int64_t>(m) * k, m, k);
                        EMatCMap dC(go + i * static_cast<int64_t>(m) * n, m, n);
                        EMatMap dB(gb + i * static_cast<int64_t>(k) * n, k, n);
                        dB.noalias() += A.transpose() * dC;
                    }
                }
            }
        },
        "matmul");
}

// ---------------------------------------------------------------------------
// Layout ops

Tensor transpose_last(const Tensor& x) {
    FD_CHECK(x.defined(), "transpose_last() on undefined tensor");
    int r = x.rank();
    FD_CHECK_T(ShapeError, r >= 2, "transpose_last requires rank >= 2, got ",
               shape_str(x.shape()));
    std::vector<int> axes(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) axes[static_cast<size_t>(i)] = i;
    std::swap(axes[static_cast<size_t>(r - 2)], axes[static_cast<size_t>(r - 1)]);
    return permute(x, axes);
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    FD_CHECK(x.defined(), "permute() on undefined tensor");
    const Shape& sx = x.shape();
    int r = static_cast<int>(sx.size());
    FD_CHECK_T(ShapeError, static_cast<int>(axes.size()) == r,
               "permute axes rank mismatch for ", shape_str(sx));
    std::vector<bool> seen(static_cast<size_t>(r), false);
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        int ax = normalize_axis(axes[static_cast<size_t>(i)], r);
        FD_CHECK_T(ShapeError, !seen[static_cast<size_t>(ax)], "duplicate axis in permute");
        seen[static_cast<size_t>(ax)] = true;
        out_shape[static_cast<size_t>(i)] = sx[static_cast<size_t>(ax)];
    }
    auto in_strides = row_major_strides(sx);
    std::vector<int64_t> walk(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        walk[static_cast<size_t>(i)] =
            in_strides[static_cast<size_t>(normalize_axis(axes[static_cast<size_t>(i)], r))];
    }

    auto out = make_impl(out_shape);
    const float* px = x.data();
    float* po = out->data.data();
    int64_t total = out->numel();
    if (total > 0) {
        std::vector<int> idx(static_cast<size_t>(r), 0);
        int64_t src = 0;
        for (int64_t o = 0; o < total; ++o) {
            po[o] = px[src];
            for (int ax = r - 1; ax >= 0; --ax) {
                auto u = static_cast<size_t>(ax);
                ++idx[u];
                src += walk[u];
                if (idx[u] < out_shape[u]) break;
                idx[u] = 0;
                src -= walk[u] * out_shape[u];
            }
        }
    }

    return finish_op(
        out, {x},
        [out_shape, walk, r](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            float* gx = ix.grad->data();
            int64_t total = self.numel();
            std::vector<int> idx(static_cast<size_t>(r), 0);
            int64_t src = 0;
            for (int64_t o = 0; o < total; ++o) {
                gx[src] += go[o];
                for (int ax = r - 1; ax >= 0; --ax) {
                    auto u = static_cast<size_t>(ax);
                    ++idx[u];
                    src += walk[u];
                    if (idx[u] < out_shape[u]) break;
                    idx[u] = 0;
                    src -= walk[u] * out_shape[u];
                }
            }
        },
        "permute");
}

Tensor reshape(const Tensor& x, Shape shape) {
    FD_CHECK(x.defined(), "reshape() on undefined tensor");
    FD_CHECK_T(ShapeError, shape_numel(shape) == x.numel(), "reshape from ",
               shape_str(x.shape()), " to ", shape_str(shape), " changes element count");
    auto out = std::make_shared<Impl>();
    out->shape = std::move(shape);
    out->data = std::vector<float>(x.data(), x.data() + x.numel());
    return finish_op(
        out, {x},
        [](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            float* gx = ix.grad->data();
            for (size_t i = 0; i < self.data.size(); ++i) gx[i] += go[i];
        },
        "reshape");
}

namespace {

/// Decomposes shape around an axis into [outer, extent, inner].
struct AxisSplit {
    int64_t outer = 1;
    int64_t extent = 1;
    int64_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
    AxisSplit s;
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
    s.extent = shape[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor slice(const Tensor& x, int axis, int start, int end) {
    FD_CHECK(x.defined(), "slice() on undefined tensor");
    int ax = normalize_axis(axis, x.rank());
    int extent = x.dim(ax);
    FD_CHECK_T(ShapeError, 0 <= start && start <= end && end <= extent, "slice [", start,
               ",", end, ") out of bounds for axis ", ax, " of ", shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(ax)] = end - start;
    auto out = make_impl(out_shape);
    AxisSplit sp = split_axis(x.shape(), ax);
    const float* px = x.data();
    float* po = out->data.data();
    int64_t width = static_cast<int64_t>(end - start) * sp.inner;
    for (int64_t o = 0; o < sp.outer; ++o) {
        std::memcpy(po + o * width, px + (o * sp.extent + start) * sp.inner,
                    static_cast<size_t>(width) * sizeof(float));
    }
    return finish_op(
        out, {x},
        [sp, start, width](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            float* gx = ix.grad->data();
            for (int64_t o = 0; o < sp.outer; ++o) {
                const float* src = go + o * width;
                float* dst = gx + (o * sp.extent + start) * sp.inner;
                for (int64_t i = 0; i < width; ++i) dst[i] += src[i];
            }
        },
        "slice");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    FD_CHECK(!parts.empty(), "concat() of zero tensors");
    for (const auto& p : parts) FD_CHECK(p.defined(), "undefined tensor passed to concat");
    int r = parts[0].rank();
    int ax = normalize_axis(axis, r);
    Shape out_shape = parts[0].shape();
    int total_extent = 0;
    for (const auto& p : parts) {
        FD_CHECK_T(ShapeError, p.rank() == r, "concat rank mismatch");
        for (int i = 0; i < r; ++i) {
            if (i == ax) continue;
            FD_CHECK_T(ShapeError, p.dim(i) == out_shape[static_cast<size_t>(i)],
                       "concat extent mismatch on axis ", i, ": ", shape_str(p.shape()),
                       " vs ", shape_str(parts[0].shape()));
        }
        total_extent += p.dim(ax);
    }
    out_shape[static_cast<size_t>(ax)] = total_extent;
    auto out = make_impl(out_shape);
    AxisSplit sp = split_axis(out_shape, ax);
    float* po = out->data.data();

    std::vector<int> extents;
    extents.reserve(parts.size());
    int64_t offset = 0;
    for (const auto& p : parts) {
        int e = p.dim(ax);
        extents.push_back(e);
        const float* src = p.data();
        int64_t width = static_cast<int64_t>(e) * sp.inner;
        for (int64_t o = 0; o < sp.outer; ++o) {
            std::memcpy(po + (o * sp.extent + offset) * sp.inner, src + o * width,
                        static_cast<size_t>(width) * sizeof(float));
        }
        offset += e;
    }

    return finish_op(
        out, parts,
        [sp, extents](Impl& self) {
            const float* go = self.grad->data();
            int64_t offset = 0;
            for (size_t pi = 0; pi < self.parents.size(); ++pi) {
                Impl& ip = *self.parents[pi];
                int64_t e = extents[pi];
                int64_t width = e * sp.inner;
                if (ip.requires_grad) {
                    ensure_grad(ip);
                    float* gp = ip.grad->data();
                    for (int64_t o = 0; o < sp.outer; ++o) {
                        const float* src = go + (o * sp.extent + offset) * sp.inner;
                        float* dst = gp + o * width;
                        for (int64_t i = 0; i < width; ++i) dst[i] += src[i];
                    }
                }
                offset += e;
            }
        },
        "concat");
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

Tensor reduce_all(const Tensor& x, bool take_mean, const char* name) {
    FD_CHECK(x.defined(), "undefined tensor passed to ", name);
    double acc = 0.0;
    const float* px = x.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    if (take_mean && n > 0) acc /= static_cast<double>(n);
    auto out = make_impl({1});
    out->data[0] = static_cast<float>(acc);
    float w = take_mean && n > 0 ? 1.0f / static_cast<float>(n) : 1.0f;
    return finish_op(
        out, {x},
        [w](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            float g = (*self.grad)[0] * w;
            for (auto& v : *ix.grad) v += g;
        },
        name);
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_all(x, false, "sum"); }
Tensor mean(const Tensor& x) { return reduce_all(x, true, "mean"); }

// ---------------------------------------------------------------------------
// Softmax / LayerNorm / activations

Tensor softmax(const Tensor& x, int axis) {
    FD_CHECK(x.defined(), "softmax() on undefined tensor");
    int ax = normalize_axis(axis, x.rank());
    AxisSplit sp = split_axis(x.shape(), ax);
    auto out = make_impl(x.shape());
    const float* px = x.data();
    float* po = out->data.data();
    for (int64_t o = 0; o < sp.outer; ++o) {
        for (int64_t i = 0; i < sp.inner; ++i) {
            const float* lane = px + o * sp.extent * sp.inner + i;
            float* dst = po + o * sp.extent * sp.inner + i;
            float mx = lane[0];
            for (int64_t e = 1; e < sp.extent; ++e) mx = std::max(mx, lane[e * sp.inner]);
            double denom = 0.0;
            for (int64_t e = 0; e < sp.extent; ++e) {
                float v = std::exp(lane[e * sp.inner] - mx);
                dst[e * sp.inner] = v;
                denom += v;
            }
            float inv = static_cast<float>(1.0 / denom);
            for (int64_t e = 0; e < sp.extent; ++e) dst[e * sp.inner] *= inv;
        }
    }
    return finish_op(
        out, {x},
        [sp](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            const float* py = self.data.data();
            float* gx = ix.grad->data();
            for (int64_t o = 0; o < sp.outer; ++o) {
                for (int64_t i = 0; i < sp.inner; ++i) {
                    int64_t base = o * sp.extent * sp.inner + i;
                    double dot = 0.0;
                    for (int64_t e = 0; e < sp.extent; ++e) {
                        int64_t off = base + e * sp.inner;
                        dot += static_cast<double>(go[off]) * py[off];
                    }
                    for (int64_t e = 0; e < sp.extent; ++e) {
                        int64_t off = base + e * sp.inner;
                        gx[off] += py[off] * (go[off] - static_cast<float>(dot));
                    }
                }
            }
        },
        "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    FD_CHECK(x.defined() && gain.defined() && bias.defined(),
             "undefined tensor passed to layer_norm");
    int h = x.dim(-1);
    FD_CHECK_T(ShapeError, gain.rank() == 1 && gain.dim(0) == h, "layer_norm gain shape ",
               shape_str(gain.shape()), " does not match feature extent ", h);
    FD_CHECK_T(ShapeError, bias.rank() == 1 && bias.dim(0) == h, "layer_norm bias shape ",
               shape_str(bias.shape()), " does not match feature extent ", h);
    constexpr float kEps = 1e-5f;
    int64_t rows = x.numel() / h;
    auto out = make_impl(x.shape());
    const float* px = x.data();
    const float* pg = gain.data();
    const float* pb = bias.data();
    float* po = out->data.data();
    std::vector<float> mus(static_cast<size_t>(rows));
    std::vector<float> invs(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * h;
        double s = 0.0;
        for (int j = 0; j < h; ++j) s += row[j];
        double mu = s / h;
        double var = 0.0;
        for (int j = 0; j < h; ++j) {
            double d = row[j] - mu;
            var += d * d;
        }
        var /= h;
        float inv = static_cast<float>(1.0 / std::sqrt(var + kEps));
        mus[static_cast<size_t>(r)] = static_cast<float>(mu);
        invs[static_cast<size_t>(r)] = inv;
        float* dst = po + r * h;
        for (int j = 0; j < h; ++j) {
            float xhat = (row[j] - static_cast<float>(mu)) * inv;
            dst[j] = xhat * pg[j] + pb[j];
        }
    }
    return finish_op(
        out, {x, gain, bias},
        [h, rows, mus = std::move(mus), invs = std::move(invs)](Impl& self) {
            Impl& ix = *self.parents[0];
            Impl& ig = *self.parents[1];
            Impl& ib = *self.parents[2];
            const float* go = self.grad->data();
            const float* px = ix.data.data();
            const float* pg = ig.data.data();
            float* gx = nullptr;
            float* gg = nullptr;
            float* gb = nullptr;
            if (ix.requires_grad) {
                ensure_grad(ix);
                gx = ix.grad->data();
            }
            if (ig.requires_grad) {
                ensure_grad(ig);
                gg = ig.grad->data();
            }
            if (ib.requires_grad) {
                ensure_grad(ib);
                gb = ib.grad->data();
            }
            for (int64_t r = 0; r < rows; ++r) {
                const float* row = px + r * h;
                const float* grow = go + r * h;
                float mu = mus[static_cast<size_t>(r)];
                float inv = invs[static_cast<size_t>(r)];
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < h; ++j) {
                    float xhat = (row[j] - mu) * inv;
                    float dyg = grow[j] * pg[j];
                    m1 += dyg;
                    m2 += static_cast<double>(dyg) * xhat;
                    if (gg) gg[j] += grow[j] * xhat;
                    if (gb) gb[j] += grow[j];
                }
                if (gx) {
                    float fm1 = static_cast<float>(m1 / h);
                    float fm2 = static_cast<float>(m2 / h);
                    float* gxr = gx + r * h;
                    for (int j = 0; j < h; ++j) {
                        float xhat = (row[j] - mu) * inv;
                        float dyg = grow[j] * pg[j];
                        gxr[j] += inv * (dyg - fm1 - xhat * fm2);
                    }
                }
            }
        },
        "layer_norm");
}

Tensor activation(const Tensor& x, Activation kind) {
    FD_CHECK(x.defined(), "activation() on undefined tensor");
    auto out = make_impl(x.shape());
    const float* px = x.data();
    float* po = out->data.data();
    int64_t n = x.numel();
    if (kind == Activation::Silu) {
        for (int64_t i = 0; i < n; ++i) {
            float s = 1.0f / (1.0f + std::exp(-px[i]));
            po[i] = px[i] * s;
        }
    } else {
        constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
        for (int64_t i = 0; i < n; ++i) {
            float v = px[i];
            float u = kC * (v + 0.044715f * v * v * v);
            po[i] = 0.5f * v * (1.0f + std::tanh(u));
        }
    }
    return finish_op(
        out, {x},
        [kind](Impl& self) {
            Impl& ix = *self.parents[0];
            if (!ix.requires_grad) return;
            ensure_grad(ix);
            const float* go = self.grad->data();
            const float* px = ix.data.data();
            float* gx = ix.grad->data();
            int64_t n = self.numel();
            if (kind == Activation::Silu) {
                for (int64_t i = 0; i < n; ++i) {
                    float s = 1.0f / (1.0f + std::exp(-px[i]));
                    gx[i] += go[i] * s * (1.0f + px[i] * (1.0f - s));
                }
            } else {
                constexpr float kC = 0.7978845608028654f;
                for (int64_t i = 0; i < n; ++i) {
                    float v = px[i];
                    float u = kC * (v + 0.044715f * v * v * v);
                    float t = std::tanh(u);
                    float du = kC * (1.0f + 3.0f * 0.044715f * v * v);
                    gx[i] += go[i] * (0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du);
                }
            }
        },
        "activation");
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean(mul(d, d));
}

bool all_finite(const Tensor& x) {
    if (!x.defined()) return false;
    const float* p = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

}  // namespace foredif
