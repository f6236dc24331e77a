#pragma once

// Dense N-d tensors with reverse-mode automatic differentiation on an
// explicit tape.  Everything is templated on the scalar type: training runs
// at float, gradient-check tests at double.  All loops are single-threaded
// with a fixed reduction order, so results are bitwise reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "fsct/common.hpp"

namespace fsct {

enum class Axis { Depth = 0, Height = 1, Width = 2 };

inline const char* axis_name(Axis a) {
    switch (a) {
        case Axis::Depth: return "depth";
        case Axis::Height: return "height";
        case Axis::Width: return "width";
    }
    return "?";
}

template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until the tensor participates in backward
    bool requires_grad = false;
    bool op_output = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        value.assign(checked_numel(shape), fill);
    }

    static std::size_t checked_numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) {
            if (e <= 0) throw ArgumentError("tensor extents must be positive");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::size_t numel() const { return value.size(); }
    bool is_scalar() const { return numel() == 1; }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
    }
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <class T>
TensorPtr<T> make_tensor(std::vector<int> shape, T fill = T(0)) {
    return std::make_shared<Tensor<T>>(std::move(shape), fill);
}

template <class T>
TensorPtr<T> make_param(std::vector<int> shape, T fill = T(0)) {
    auto t = make_tensor<T>(std::move(shape), fill);
    t->requires_grad = true;
    t->ensure_grad();
    return t;
}

template <class T>
TensorPtr<T> make_leaf(std::vector<int> shape, std::vector<T> values) {
    auto t = std::make_shared<Tensor<T>>();
    if (Tensor<T>::checked_numel(shape) != values.size())
        throw ShapeError("leaf tensor: value count does not match shape");
    t->shape = std::move(shape);
    t->value = std::move(values);
    return t;
}

// The computation record.  Ops append one step per executed operation;
// backward() replays them once, in reverse.
template <class T>
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    TensorPtr<T> alloc(std::vector<int> shape) {
        auto t = make_tensor<T>(std::move(shape));
        t->op_output = true;
        if (grad_enabled_) t->ensure_grad();
        return t;
    }

    void record(TensorPtr<T> out, std::function<void()> backward_fn) {
        if (!grad_enabled_) return;
        steps_.push_back(Step{std::move(out), std::move(backward_fn)});
    }

    // Seeds d(loss)=1 and accumulates into the grads of every reachable
    // requires_grad leaf.  Intermediate (op output) grads are reset first,
    // so repeated calls double leaf grads exactly.
    void backward(const TensorPtr<T>& loss) {
        if (!grad_enabled_) throw StateError("backward on a no-grad graph");
        if (!loss || !loss->is_scalar())
            throw ArgumentError("backward requires a scalar loss tensor");
        for (auto& s : steps_) s.out->zero_grad();
        loss->ensure_grad();
        loss->grad[0] += T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
    }

    void clear() { steps_.clear(); }
    std::size_t recorded_ops() const { return steps_.size(); }

private:
    struct Step {
        TensorPtr<T> out;
        std::function<void()> fn;
    };
    std::vector<Step> steps_;
    bool grad_enabled_;
};

namespace detail {

// dst[x] += w * src[x + s] over the x for which x + s stays in [0, n)
template <class T>
inline void shifted_axpy(T* dst, const T* src, T w, int n, int s) {
    const int x0 = std::max(0, -s);
    const int x1 = n - std::max(0, s);
    const T* sp = src + s;
    for (int x = x0; x < x1; ++x) dst[x] += w * sp[x];
}

template <class T>
inline T shifted_dot(const T* a, const T* b, int n, int s) {
    const int x0 = std::max(0, -s);
    const int x1 = n - std::max(0, s);
    const T* bp = b + s;
    T acc = T(0);
    for (int x = x0; x < x1; ++x) acc += a[x] * bp[x];
    return acc;
}

template <class T>
inline void axpy(T* dst, const T* src, T w, int n) {
    for (int x = 0; x < n; ++x) dst[x] += w * src[x];
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv3d: input [Cin,D,H,W] * kernel [Cout,Cin,k,k,k] (+ bias [Cout])
//   -> [Cout,D,H,W], stride 1, zero same-padding.
// ---------------------------------------------------------------------------

template <class T>
void conv3d_forward(const T* in, const T* ker, const T* bias, T* out,
                    int cin, int d, int h, int w, int cout, int k) {
    const int r = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chan = static_cast<std::size_t>(d) * plane;
    for (int co = 0; co < cout; ++co) {
        T* oc = out + co * chan;
        const T b = bias ? bias[co] : T(0);
        std::fill(oc, oc + chan, b);
        for (int ci = 0; ci < cin; ++ci) {
            const T* icn = in + ci * chan;
            const T* kc = ker + (static_cast<std::size_t>(co) * cin + ci) * k * k * k;
            for (int z = 0; z < d; ++z) {
                for (int a = 0; a < k; ++a) {
                    const int zi = z + a - r;
                    if (zi < 0 || zi >= d) continue;
                    for (int y = 0; y < h; ++y) {
                        T* orow = oc + z * plane + static_cast<std::size_t>(y) * w;
                        for (int b2 = 0; b2 < k; ++b2) {
                            const int yi = y + b2 - r;
                            if (yi < 0 || yi >= h) continue;
                            const T* irow = icn + zi * plane + static_cast<std::size_t>(yi) * w;
                            const T* krow = kc + (a * k + b2) * k;
                            for (int c = 0; c < k; ++c)
                                detail::shifted_axpy(orow, irow, krow[c], w, c - r);
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void conv3d_backward(const T* in, const T* ker, const T* gout,
                     T* gin, T* gker, T* gbias,
                     int cin, int d, int h, int w, int cout, int k) {
    const int r = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chan = static_cast<std::size_t>(d) * plane;
    for (int co = 0; co < cout; ++co) {
        const T* gc = gout + co * chan;
        if (gbias) {
            T acc = T(0);
            for (std::size_t i = 0; i < chan; ++i) acc += gc[i];
            gbias[co] += acc;
        }
        for (int ci = 0; ci < cin; ++ci) {
            const T* icn = in + ci * chan;
            T* gicn = gin ? gin + ci * chan : nullptr;
            const std::size_t kbase = (static_cast<std::size_t>(co) * cin + ci) * k * k * k;
            for (int z = 0; z < d; ++z) {
                for (int a = 0; a < k; ++a) {
                    const int zi = z + a - r;
                    if (zi < 0 || zi >= d) continue;
                    for (int y = 0; y < h; ++y) {
                        const T* grow = gc + z * plane + static_cast<std::size_t>(y) * w;
                        for (int b2 = 0; b2 < k; ++b2) {
                            const int yi = y + b2 - r;
                            if (yi < 0 || yi >= h) continue;
                            const std::size_t roff = zi * plane + static_cast<std::size_t>(yi) * w;
                            const T* irow = icn + roff;
                            for (int c = 0; c < k; ++c) {
                                const std::size_t ki = kbase + (a * k + b2) * k + c;
                                if (gicn)
                                    detail::shifted_axpy(gicn + roff, grow, ker[ki], w, -(c - r));
                                if (gker)
                                    gker[ki] += detail::shifted_dot(grow, irow, w, c - r);
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
TensorPtr<T> conv3d(Graph<T>& g, const TensorPtr<T>& input, const TensorPtr<T>& kernel,
                    const TensorPtr<T>& bias = nullptr) {
    detail::require(input->shape.size() == 4, "conv3d: input must be [Cin,D,H,W]");
    detail::require(kernel->shape.size() == 5, "conv3d: kernel must be [Cout,Cin,k,k,k]");
    const int cin = input->shape[0];
    const int d = input->shape[1], h = input->shape[2], w = input->shape[3];
    const int cout = kernel->shape[0];
    const int k = kernel->shape[2];
    if (kernel->shape[1] != cin)
        throw ShapeError(detail::cat("conv3d: kernel expects ", kernel->shape[1],
                                     " input channels, got ", cin));
    if (kernel->shape[3] != k || kernel->shape[4] != k)
        throw ShapeError("conv3d: kernel must be cubic");
    if (k % 2 == 0)
        throw ArgumentError(detail::cat("conv3d: even kernel size ", k, " unsupported"));
    if (bias) {
        detail::require(bias->shape.size() == 1 && bias->shape[0] == cout,
                        "conv3d: bias must be [Cout]");
    }

    auto out = g.alloc({cout, d, h, w});
    conv3d_forward(input->value.data(), kernel->value.data(),
                   bias ? bias->value.data() : nullptr, out->value.data(),
                   cin, d, h, w, cout, k);
    g.record(out, [input, kernel, bias, out, cin, d, h, w, cout, k]() {
        input->ensure_grad();
        kernel->ensure_grad();
        if (bias) bias->ensure_grad();
        conv3d_backward(input->value.data(), kernel->value.data(), out->grad.data(),
                        input->grad.data(), kernel->grad.data(),
                        bias ? bias->grad.data() : nullptr, cin, d, h, w, cout, k);
    });
    return out;
}

// ---------------------------------------------------------------------------
// conv1d_axis: input [Cin,D,H,W] * kernel [Cout,Cin,k] along one spatial axis.
// ---------------------------------------------------------------------------

template <class T>
void conv1d_axis_forward(const T* in, const T* ker, const T* bias, T* out,
                         int cin, int d, int h, int w, int cout, int k, Axis axis) {
    const int r = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chan = static_cast<std::size_t>(d) * plane;
    for (int co = 0; co < cout; ++co) {
        T* oc = out + co * chan;
        std::fill(oc, oc + chan, bias ? bias[co] : T(0));
        for (int ci = 0; ci < cin; ++ci) {
            const T* icn = in + ci * chan;
            const T* kv = ker + (static_cast<std::size_t>(co) * cin + ci) * k;
            for (int z = 0; z < d; ++z) {
                for (int y = 0; y < h; ++y) {
                    T* orow = oc + z * plane + static_cast<std::size_t>(y) * w;
                    for (int t = 0; t < k; ++t) {
                        const int off = t - r;
                        if (axis == Axis::Width) {
                            const T* irow = icn + z * plane + static_cast<std::size_t>(y) * w;
                            detail::shifted_axpy(orow, irow, kv[t], w, off);
                        } else if (axis == Axis::Height) {
                            const int yi = y + off;
                            if (yi < 0 || yi >= h) continue;
                            const T* irow = icn + z * plane + static_cast<std::size_t>(yi) * w;
                            detail::axpy(orow, irow, kv[t], w);
                        } else {
                            const int zi = z + off;
                            if (zi < 0 || zi >= d) continue;
                            const T* irow = icn + zi * plane + static_cast<std::size_t>(y) * w;
                            detail::axpy(orow, irow, kv[t], w);
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void conv1d_axis_backward(const T* in, const T* ker, const T* gout,
                          T* gin, T* gker, T* gbias,
                          int cin, int d, int h, int w, int cout, int k, Axis axis) {
    const int r = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t chan = static_cast<std::size_t>(d) * plane;
    for (int co = 0; co < cout; ++co) {
        const T* gc = gout + co * chan;
        if (gbias) {
            T acc = T(0);
            for (std::size_t i = 0; i < chan; ++i) acc += gc[i];
            gbias[co] += acc;
        }
        for (int ci = 0; ci < cin; ++ci) {
            const T* icn = in + ci * chan;
            T* gicn = gin ? gin + ci * chan : nullptr;
            const std::size_t kbase = (static_cast<std::size_t>(co) * cin + ci) * k;
            for (int z = 0; z < d; ++z) {
                for (int y = 0; y < h; ++y) {
                    const T* grow = gc + z * plane + static_cast<std::size_t>(y) * w;
                    for (int t = 0; t < k; ++t) {
                        const int off = t - r;
                        int zi = z, yi = y, s = 0;
                        if (axis == Axis::Width) s = off;
                        else if (axis == Axis::Height) yi = y + off;
                        else zi = z + off;
                        if (yi < 0 || yi >= h || zi < 0 || zi >= d) continue;
                        const std::size_t roff = zi * plane + static_cast<std::size_t>(yi) * w;
                        if (gicn) detail::shifted_axpy(gicn + roff, grow, ker[kbase + t], w, -s);
                        if (gker) gker[kbase + t] += detail::shifted_dot(grow, icn + roff, w, s);
                    }
                }
            }
        }
    }
}

template <class T>
TensorPtr<T> conv1d_axis(Graph<T>& g, const TensorPtr<T>& input, const TensorPtr<T>& kernel,
                         Axis axis, const TensorPtr<T>& bias = nullptr) {
    detail::require(input->shape.size() == 4, "conv1d_axis: input must be [Cin,D,H,W]");
    detail::require(kernel->shape.size() == 3, "conv1d_axis: kernel must be [Cout,Cin,k]");
    const int ax = static_cast<int>(axis);
    if (ax < 0 || ax > 2) throw ArgumentError("conv1d_axis: invalid axis tag");
    const int cin = input->shape[0];
    const int d = input->shape[1], h = input->shape[2], w = input->shape[3];
    const int cout = kernel->shape[0];
    const int k = kernel->shape[2];
    if (kernel->shape[1] != cin)
        throw ShapeError(detail::cat("conv1d_axis: kernel expects ", kernel->shape[1],
                                     " input channels, got ", cin));
    if (k % 2 == 0)
        throw ArgumentError(detail::cat("conv1d_axis: even kernel size ", k, " unsupported"));
    if (bias)
        detail::require(bias->shape.size() == 1 && bias->shape[0] == cout,
                        "conv1d_axis: bias must be [Cout]");

    auto out = g.alloc({cout, d, h, w});
    conv1d_axis_forward(input->value.data(), kernel->value.data(),
                        bias ? bias->value.data() : nullptr, out->value.data(),
                        cin, d, h, w, cout, k, axis);
    g.record(out, [input, kernel, bias, out, cin, d, h, w, cout, k, axis]() {
        input->ensure_grad();
        kernel->ensure_grad();
        if (bias) bias->ensure_grad();
        conv1d_axis_backward(input->value.data(), kernel->value.data(), out->grad.data(),
                             input->grad.data(), kernel->grad.data(),
                             bias ? bias->grad.data() : nullptr, cin, d, h, w, cout, k, axis);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Pointwise and reduction ops.
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> softmax_channels(Graph<T>& g, const TensorPtr<T>& x) {
    detail::require(x->shape.size() == 4, "softmax_channels: input must be [C,D,H,W]");
    const int c = x->shape[0];
    if (c < 2) throw ShapeError("softmax_channels: needs at least 2 channels");
    const std::size_t vox = x->numel() / c;
    auto out = g.alloc(x->shape);
    const T* xin = x->value.data();
    T* o = out->value.data();
    for (std::size_t i = 0; i < vox; ++i) {
        T m = xin[i];
        for (int j = 1; j < c; ++j) m = std::max(m, xin[j * vox + i]);
        T sum = T(0);
        for (int j = 0; j < c; ++j) {
            const T e = std::exp(xin[j * vox + i] - m);
            o[j * vox + i] = e;
            sum += e;
        }
        for (int j = 0; j < c; ++j) o[j * vox + i] /= sum;
    }
    g.record(out, [x, out, c, vox]() {
        x->ensure_grad();
        const T* s = out->value.data();
        const T* go = out->grad.data();
        T* gx = x->grad.data();
        for (std::size_t i = 0; i < vox; ++i) {
            T dot = T(0);
            for (int j = 0; j < c; ++j) dot += go[j * vox + i] * s[j * vox + i];
            for (int j = 0; j < c; ++j)
                gx[j * vox + i] += s[j * vox + i] * (go[j * vox + i] - dot);
        }
    });
    return out;
}

template <class T>
TensorPtr<T> l1_mean(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape) throw ShapeError("l1_mean: operand shapes differ");
    const std::size_t n = a->numel();
    auto out = g.alloc({1});
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(a->value[i] - b->value[i]);
    out->value[0] = acc / static_cast<T>(n);
    g.record(out, [a, b, out, n]() {
        a->ensure_grad();
        b->ensure_grad();
        const T go = out->grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = a->value[i] - b->value[i];
            const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
            a->grad[i] += go * s;
            b->grad[i] -= go * s;
        }
    });
    return out;
}

template <class T>
TensorPtr<T> add(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape) throw ShapeError("add: operand shapes differ");
    auto out = g.alloc(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] + b->value[i];
    g.record(out, [a, b, out]() {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) {
            a->grad[i] += out->grad[i];
            b->grad[i] += out->grad[i];
        }
    });
    return out;
}

template <class T>
TensorPtr<T> sub(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape) throw ShapeError("sub: operand shapes differ");
    auto out = g.alloc(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] - b->value[i];
    g.record(out, [a, b, out]() {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) {
            a->grad[i] += out->grad[i];
            b->grad[i] -= out->grad[i];
        }
    });
    return out;
}

template <class T>
TensorPtr<T> scale(Graph<T>& g, const TensorPtr<T>& a, T factor) {
    auto out = g.alloc(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->value[i] = factor * a->value[i];
    g.record(out, [a, out, factor]() {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += factor * out->grad[i];
    });
    return out;
}

template <class T>
TensorPtr<T> relu(Graph<T>& g, const TensorPtr<T>& a) {
    auto out = g.alloc(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i)
        out->value[i] = a->value[i] > T(0) ? a->value[i] : T(0);
    g.record(out, [a, out]() {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i)
            if (a->value[i] > T(0)) a->grad[i] += out->grad[i];
    });
    return out;
}

// out[c,i] = v[c,i] * p[0,i]  (probability map tiled over channels)
template <class T>
TensorPtr<T> broadcast_mul(Graph<T>& g, const TensorPtr<T>& v, const TensorPtr<T>& p) {
    detail::require(v->shape.size() == 4 && p->shape.size() == 4,
                    "broadcast_mul: operands must be rank 4");
    detail::require(p->shape[0] == 1, "broadcast_mul: map must have one channel");
    detail::require(std::equal(v->shape.begin() + 1, v->shape.end(), p->shape.begin() + 1),
                    "broadcast_mul: spatial shapes differ");
    const int c = v->shape[0];
    const std::size_t vox = p->numel();
    auto out = g.alloc(v->shape);
    for (int j = 0; j < c; ++j)
        for (std::size_t i = 0; i < vox; ++i)
            out->value[j * vox + i] = v->value[j * vox + i] * p->value[i];
    g.record(out, [v, p, out, c, vox]() {
        v->ensure_grad();
        p->ensure_grad();
        for (int j = 0; j < c; ++j)
            for (std::size_t i = 0; i < vox; ++i) {
                v->grad[j * vox + i] += out->grad[j * vox + i] * p->value[i];
                p->grad[i] += out->grad[j * vox + i] * v->value[j * vox + i];
            }
    });
    return out;
}

template <class T>
TensorPtr<T> channel_slice(Graph<T>& g, const TensorPtr<T>& x, int channel) {
    detail::require(x->shape.size() == 4, "channel_slice: input must be rank 4");
    if (channel < 0 || channel >= x->shape[0])
        throw ArgumentError("channel_slice: channel out of range");
    const std::size_t vox = x->numel() / x->shape[0];
    auto out = g.alloc({1, x->shape[1], x->shape[2], x->shape[3]});
    std::copy_n(x->value.data() + channel * vox, vox, out->value.data());
    g.record(out, [x, out, channel, vox]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < vox; ++i)
            x->grad[channel * vox + i] += out->grad[i];
    });
    return out;
}

template <class T>
TensorPtr<T> concat_channels(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require(a->shape.size() == 4 && b->shape.size() == 4,
                    "concat_channels: operands must be rank 4");
    detail::require(std::equal(a->shape.begin() + 1, a->shape.end(), b->shape.begin() + 1),
                    "concat_channels: spatial shapes differ");
    const std::size_t na = a->numel(), nb = b->numel();
    auto out = g.alloc({a->shape[0] + b->shape[0], a->shape[1], a->shape[2], a->shape[3]});
    std::copy_n(a->value.data(), na, out->value.data());
    std::copy_n(b->value.data(), nb, out->value.data() + na);
    g.record(out, [a, b, out, na, nb]() {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < na; ++i) a->grad[i] += out->grad[i];
        for (std::size_t i = 0; i < nb; ++i) b->grad[i] += out->grad[na + i];
    });
    return out;
}

template <class T>
TensorPtr<T> avg_pool2(Graph<T>& g, const TensorPtr<T>& x) {
    detail::require(x->shape.size() == 4, "avg_pool2: input must be [C,D,H,W]");
    const int c = x->shape[0], d = x->shape[1], h = x->shape[2], w = x->shape[3];
    const char* names[3] = {"depth", "height", "width"};
    const int exts[3] = {d, h, w};
    for (int i = 0; i < 3; ++i)
        if (exts[i] % 2 != 0)
            throw ShapeError(detail::cat("avg_pool2: ", names[i], " extent ", exts[i],
                                         " is not even"));
    const int d2 = d / 2, h2 = h / 2, w2 = w / 2;
    auto out = g.alloc({c, d2, h2, w2});
    const std::size_t chan_in = static_cast<std::size_t>(d) * h * w;
    const std::size_t chan_out = static_cast<std::size_t>(d2) * h2 * w2;
    for (int ch = 0; ch < c; ++ch) {
        const T* xi = x->value.data() + ch * chan_in;
        T* o = out->value.data() + ch * chan_out;
        for (int z = 0; z < d2; ++z)
            for (int y = 0; y < h2; ++y)
                for (int xx = 0; xx < w2; ++xx) {
                    T acc = T(0);
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int cc = 0; cc < 2; ++cc)
                                acc += xi[((2 * z + a) * static_cast<std::size_t>(h) +
                                           (2 * y + b)) * w + (2 * xx + cc)];
                    o[(z * static_cast<std::size_t>(h2) + y) * w2 + xx] = acc / T(8);
                }
    }
    g.record(out, [x, out, c, d2, h2, w2, h, w, chan_in, chan_out]() {
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            T* gx = x->grad.data() + ch * chan_in;
            const T* go = out->grad.data() + ch * chan_out;
            for (int z = 0; z < d2; ++z)
                for (int y = 0; y < h2; ++y)
                    for (int xx = 0; xx < w2; ++xx) {
                        const T gv = go[(z * static_cast<std::size_t>(h2) + y) * w2 + xx] / T(8);
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b)
                                for (int cc = 0; cc < 2; ++cc)
                                    gx[((2 * z + a) * static_cast<std::size_t>(h) +
                                        (2 * y + b)) * w + (2 * xx + cc)] += gv;
                    }
        }
    });
    return out;
}

template <class T>
TensorPtr<T> upsample_nearest2(Graph<T>& g, const TensorPtr<T>& x) {
    detail::require(x->shape.size() == 4, "upsample_nearest2: input must be [C,D,H,W]");
    const int c = x->shape[0], d = x->shape[1], h = x->shape[2], w = x->shape[3];
    const int d2 = 2 * d, h2 = 2 * h, w2 = 2 * w;
    auto out = g.alloc({c, d2, h2, w2});
    const std::size_t chan_in = static_cast<std::size_t>(d) * h * w;
    const std::size_t chan_out = static_cast<std::size_t>(d2) * h2 * w2;
    for (int ch = 0; ch < c; ++ch) {
        const T* xi = x->value.data() + ch * chan_in;
        T* o = out->value.data() + ch * chan_out;
        for (int z = 0; z < d2; ++z)
            for (int y = 0; y < h2; ++y)
                for (int xx = 0; xx < w2; ++xx)
                    o[(z * static_cast<std::size_t>(h2) + y) * w2 + xx] =
                        xi[((z / 2) * static_cast<std::size_t>(h) + (y / 2)) * w + (xx / 2)];
    }
    g.record(out, [x, out, c, d, h, w, h2, w2, chan_in, chan_out]() {
        x->ensure_grad();
        const int d2 = 2 * d;
        for (int ch = 0; ch < c; ++ch) {
            T* gx = x->grad.data() + ch * chan_in;
            const T* go = out->grad.data() + ch * chan_out;
            for (int z = 0; z < d2; ++z)
                for (int y = 0; y < 2 * h; ++y)
                    for (int xx = 0; xx < 2 * w; ++xx)
                        gx[((z / 2) * static_cast<std::size_t>(h) + (y / 2)) * w + (xx / 2)] +=
                            go[(z * static_cast<std::size_t>(h2) + y) * w2 + xx];
        }
    });
    return out;
}

template <class T>
TensorPtr<T> sum_all(Graph<T>& g, const TensorPtr<T>& x) {
    auto out = g.alloc({1});
    T acc = T(0);
    for (std::size_t i = 0; i < x->numel(); ++i) acc += x->value[i];
    out->value[0] = acc;
    g.record(out, [x, out]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[0];
    });
    return out;
}

template <class T>
TensorPtr<T> mean_all(Graph<T>& g, const TensorPtr<T>& x) {
    auto out = g.alloc({1});
    T acc = T(0);
    for (std::size_t i = 0; i < x->numel(); ++i) acc += x->value[i];
    const T n = static_cast<T>(x->numel());
    out->value[0] = acc / n;
    g.record(out, [x, out, n]() {
        x->ensure_grad();
        const T go = out->grad[0] / n;
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += go;
    });
    return out;
}

// per-channel mean over the spatial extent: [C,D,H,W] -> [C]
template <class T>
TensorPtr<T> mean_spatial(Graph<T>& g, const TensorPtr<T>& x) {
    detail::require(x->shape.size() == 4, "mean_spatial: input must be [C,D,H,W]");
    const int c = x->shape[0];
    const std::size_t vox = x->numel() / c;
    auto out = g.alloc({c});
    for (int j = 0; j < c; ++j) {
        T acc = T(0);
        for (std::size_t i = 0; i < vox; ++i) acc += x->value[j * vox + i];
        out->value[j] = acc / static_cast<T>(vox);
    }
    g.record(out, [x, out, c, vox]() {
        x->ensure_grad();
        for (int j = 0; j < c; ++j) {
            const T go = out->grad[j] / static_cast<T>(vox);
            for (std::size_t i = 0; i < vox; ++i) x->grad[j * vox + i] += go;
        }
    });
    return out;
}

// score = dot(w, x) + b : [C] x [C] (+[1]) -> [1]
template <class T>
TensorPtr<T> linear_scalar(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& w,
                           const TensorPtr<T>& b) {
    detail::require(x->shape.size() == 1 && w->shape == x->shape,
                    "linear_scalar: feature/weight shapes differ");
    detail::require(b->shape.size() == 1 && b->shape[0] == 1, "linear_scalar: bias must be [1]");
    auto out = g.alloc({1});
    T acc = b->value[0];
    for (std::size_t i = 0; i < x->numel(); ++i) acc += w->value[i] * x->value[i];
    out->value[0] = acc;
    g.record(out, [x, w, b, out]() {
        x->ensure_grad();
        w->ensure_grad();
        b->ensure_grad();
        const T go = out->grad[0];
        for (std::size_t i = 0; i < x->numel(); ++i) {
            x->grad[i] += go * w->value[i];
            w->grad[i] += go * x->value[i];
        }
        b->grad[0] += go;
    });
    return out;
}

template <class T>
TensorPtr<T> stack_scalars(Graph<T>& g, const std::vector<TensorPtr<T>>& xs) {
    if (xs.empty()) throw ArgumentError("stack_scalars: empty list");
    for (const auto& x : xs)
        if (!x->is_scalar()) throw ShapeError("stack_scalars: inputs must be scalar");
    auto out = g.alloc({static_cast<int>(xs.size())});
    for (std::size_t i = 0; i < xs.size(); ++i) out->value[i] = xs[i]->value[0];
    g.record(out, [xs, out]() {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs[i]->ensure_grad();
            xs[i]->grad[0] += out->grad[i];
        }
    });
    return out;
}

// out[i] = x[i] - s[0]
template <class T>
TensorPtr<T> sub_broadcast(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& s) {
    if (!s->is_scalar()) throw ShapeError("sub_broadcast: subtrahend must be scalar");
    auto out = g.alloc(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] - s->value[0];
    g.record(out, [x, s, out]() {
        x->ensure_grad();
        s->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) {
            x->grad[i] += out->grad[i];
            s->grad[0] -= out->grad[i];
        }
    });
    return out;
}

// Numerically stable log(sigmoid(x)) with the probability clamped at 1e-12,
// i.e. values never drop below log(1e-12); the clamped region has zero slope.
template <class T>
TensorPtr<T> log_sigmoid_clamped(Graph<T>& g, const TensorPtr<T>& x) {
    static const T kFloor = std::log(T(1e-12));
    auto out = g.alloc(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const T v = x->value[i];
        const T ls = v >= T(0) ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
        out->value[i] = std::max(ls, kFloor);
    }
    g.record(out, [x, out]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < out->numel(); ++i) {
            if (out->value[i] <= kFloor) continue;
            const T v = x->value[i];
            const T sig_neg = v >= T(0) ? std::exp(-v) / (T(1) + std::exp(-v))
                                        : T(1) / (T(1) + std::exp(v));
            x->grad[i] += out->grad[i] * sig_neg;
        }
    });
    return out;
}

} // namespace fsct
