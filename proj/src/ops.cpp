#include "bioseg/ops.hpp"

#include <cmath>

namespace bioseg::nn {

namespace {

template <class T>
void check_conv_args(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                     int stride, int padding) {
    const int k = weight.h();
    if (k < 1 || weight.w() != k) throw ContractViolation("conv2d: kernel must be square, k >= 1");
    if (stride != 1 && stride != 2) throw ContractViolation("conv2d: stride must be 1 or 2");
    if (padding < 0) throw ContractViolation("conv2d: padding must be non-negative");
    if (weight.c() != input.c())
        throw ContractViolation("conv2d: weight cin does not match input channels");
    if (bias.c() != weight.n() || bias.n() != 1 || bias.h() != 1 || bias.w() != 1)
        throw ContractViolation("conv2d: bias shape must be [1,cout,1,1]");
    if (input.h() + 2 * padding < k || input.w() + 2 * padding < k)
        throw ContractViolation("conv2d: padded input smaller than kernel");
}

}  // namespace

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding, Conv2dCtx<T>* ctx) {
    check_conv_args(input, weight, bias, stride, padding);

    const int n = input.n(), cin = input.c(), h = input.h(), w = input.w();
    const int cout = weight.n(), k = weight.h();
    const int oh = (h + 2 * padding - k) / stride + 1;
    const int ow = (w + 2 * padding - k) / stride + 1;

    TensorT<T> out(n, cout, oh, ow);

    for (int in = 0; in < n; ++in) {
        for (int o = 0; o < cout; ++o) {
            T* out_plane = &out.data[out.index(in, o, 0, 0)];
            const T b = bias.data[static_cast<size_t>(o)];
            for (int i = 0; i < oh * ow; ++i) out_plane[i] = b;

            for (int ci = 0; ci < cin; ++ci) {
                const T* in_plane = &input.data[input.index(in, ci, 0, 0)];
                const T* w_cell = &weight.data[weight.index(o, ci, 0, 0)];
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        const T wv = w_cell[dy * k + dx];
                        if (wv == T(0)) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + dy - padding;
                            if (iy < 0 || iy >= h) continue;
                            T* out_row = out_plane + static_cast<size_t>(oy) * ow;
                            const T* in_row = in_plane + static_cast<size_t>(iy) * w;
                            if (stride == 1) {
                                int ox0 = 0, ox1 = ow;
                                // keep ix = ox + dx - padding within [0, w)
                                if (dx - padding < 0) ox0 = padding - dx;
                                if (ox1 + dx - padding > w) ox1 = w - dx + padding;
                                const T* in_off = in_row + dx - padding;
                                for (int ox = ox0; ox < ox1; ++ox) out_row[ox] += wv * in_off[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride + dx - padding;
                                    if (ix < 0 || ix >= w) continue;
                                    out_row[ox] += wv * in_row[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if (ctx) {
        ctx->input = input;
        ctx->weight = weight;
        ctx->stride = stride;
        ctx->padding = padding;
        ctx->valid = true;
    }
    return out;
}

template <class T>
Conv2dGrads<T> conv2d_backward(const Conv2dCtx<T>& ctx, const TensorT<T>& grad_out) {
    if (!ctx.valid) throw ContractViolation("conv2d_backward: missing forward context");

    const TensorT<T>& input = ctx.input;
    const TensorT<T>& weight = ctx.weight;
    const int stride = ctx.stride, padding = ctx.padding;
    const int n = input.n(), cin = input.c(), h = input.h(), w = input.w();
    const int cout = weight.n(), k = weight.h();
    const int oh = grad_out.h(), ow = grad_out.w();
    if (grad_out.n() != n || grad_out.c() != cout)
        throw ContractViolation("conv2d_backward: grad_out shape mismatch");

    Conv2dGrads<T> g;
    g.input = TensorT<T>(n, cin, h, w);
    g.weight = TensorT<T>(cout, cin, k, k);
    g.bias = TensorT<T>(1, cout, 1, 1);

    for (int in = 0; in < n; ++in) {
        for (int o = 0; o < cout; ++o) {
            const T* go_plane = &grad_out.data[grad_out.index(in, o, 0, 0)];

            T bias_sum = 0;
            for (int i = 0; i < oh * ow; ++i) bias_sum += go_plane[i];
            g.bias.data[static_cast<size_t>(o)] += bias_sum;

            for (int ci = 0; ci < cin; ++ci) {
                const T* in_plane = &input.data[input.index(in, ci, 0, 0)];
                T* gi_plane = &g.input.data[g.input.index(in, ci, 0, 0)];
                const T* w_cell = &weight.data[weight.index(o, ci, 0, 0)];
                T* gw_cell = &g.weight.data[g.weight.index(o, ci, 0, 0)];

                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        const T wv = w_cell[dy * k + dx];
                        T gw_sum = 0;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + dy - padding;
                            if (iy < 0 || iy >= h) continue;
                            const T* go_row = go_plane + static_cast<size_t>(oy) * ow;
                            const T* in_row = in_plane + static_cast<size_t>(iy) * w;
                            T* gi_row = gi_plane + static_cast<size_t>(iy) * w;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride + dx - padding;
                                if (ix < 0 || ix >= w) continue;
                                const T go = go_row[ox];
                                gw_sum += go * in_row[ix];
                                gi_row[ix] += go * wv;
                            }
                        }
                        gw_cell[dy * k + dx] += gw_sum;
                    }
                }
            }
        }
    }
    return g;
}

template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& input, const TensorT<T>& gamma, const TensorT<T>& beta,
                       TensorT<T>& running_mean, TensorT<T>& running_var, Mode mode, T momentum,
                       T eps, BatchNormCtx<T>* ctx) {
    const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
    if (gamma.c() != c || beta.c() != c || running_mean.c() != c || running_var.c() != c)
        throw ContractViolation("batchnorm2d: per-channel parameter shape mismatch");
    if (eps <= T(0)) throw ContractViolation("batchnorm2d: eps must be positive");

    const size_t plane = static_cast<size_t>(h) * w;
    const size_t m = static_cast<size_t>(n) * plane;  // samples per channel
    if (mode == Mode::train && m < 2)
        throw ContractViolation("batchnorm2d: train mode requires n*h*w >= 2 per channel");

    TensorT<T> out(n, c, h, w);
    std::vector<T> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));

    if (mode == Mode::train) {
        for (int ci = 0; ci < c; ++ci) {
            double sum = 0.0, sq = 0.0;
            for (int in = 0; in < n; ++in) {
                const T* p = &input.data[input.index(in, ci, 0, 0)];
                for (size_t i = 0; i < plane; ++i) {
                    sum += p[i];
                    sq += static_cast<double>(p[i]) * p[i];
                }
            }
            const double mu = sum / static_cast<double>(m);
            const double v = sq / static_cast<double>(m) - mu * mu;  // biased
            mean[ci] = static_cast<T>(mu);
            var[ci] = static_cast<T>(v < 0.0 ? 0.0 : v);
            running_mean.data[ci] = (T(1) - momentum) * running_mean.data[ci] + momentum * mean[ci];
            running_var.data[ci] = (T(1) - momentum) * running_var.data[ci] + momentum * var[ci];
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            mean[ci] = running_mean.data[ci];
            var[ci] = running_var.data[ci];
        }
    }

    for (int ci = 0; ci < c; ++ci) {
        const T inv = T(1) / std::sqrt(var[ci] + eps);
        const T gm = gamma.data[ci], bt = beta.data[ci], mu = mean[ci];
        for (int in = 0; in < n; ++in) {
            const T* p = &input.data[input.index(in, ci, 0, 0)];
            T* q = &out.data[out.index(in, ci, 0, 0)];
            for (size_t i = 0; i < plane; ++i) q[i] = gm * (p[i] - mu) * inv + bt;
        }
    }

    if (ctx) {
        if (mode != Mode::train)
            throw ContractViolation("batchnorm2d: backward context only available in train mode");
        ctx->input = input;
        ctx->gamma = gamma;
        ctx->mean = std::move(mean);
        ctx->var = std::move(var);
        ctx->eps = eps;
        ctx->valid = true;
    }
    return out;
}

template <class T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCtx<T>& ctx, const TensorT<T>& grad_out) {
    if (!ctx.valid) throw ContractViolation("batchnorm2d_backward: missing forward context");

    const TensorT<T>& x = ctx.input;
    const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
    const size_t plane = static_cast<size_t>(h) * w;
    const double m = static_cast<double>(n) * plane;

    BatchNormGrads<T> g;
    g.input = TensorT<T>(n, c, h, w);
    g.gamma = TensorT<T>(1, c, 1, 1);
    g.beta = TensorT<T>(1, c, 1, 1);

    for (int ci = 0; ci < c; ++ci) {
        const double mu = ctx.mean[ci];
        const double inv = 1.0 / std::sqrt(static_cast<double>(ctx.var[ci]) + ctx.eps);
        const double gm = ctx.gamma.data[ci];

        // dgamma = sum dy*xhat, dbeta = sum dy,
        // dx = gamma*inv/m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int in = 0; in < n; ++in) {
            const T* xp = &x.data[x.index(in, ci, 0, 0)];
            const T* gp = &grad_out.data[grad_out.index(in, ci, 0, 0)];
            for (size_t i = 0; i < plane; ++i) {
                const double xhat = (xp[i] - mu) * inv;
                sum_dy += gp[i];
                sum_dy_xhat += gp[i] * xhat;
            }
        }
        g.gamma.data[ci] = static_cast<T>(sum_dy_xhat);
        g.beta.data[ci] = static_cast<T>(sum_dy);

        const double scale = gm * inv / m;
        for (int in = 0; in < n; ++in) {
            const T* xp = &x.data[x.index(in, ci, 0, 0)];
            const T* gp = &grad_out.data[grad_out.index(in, ci, 0, 0)];
            T* op = &g.input.data[g.input.index(in, ci, 0, 0)];
            for (size_t i = 0; i < plane; ++i) {
                const double xhat = (xp[i] - mu) * inv;
                op[i] = static_cast<T>(scale * (m * gp[i] - sum_dy - xhat * sum_dy_xhat));
            }
        }
    }
    return g;
}

template <class T>
TensorT<T> relu(const TensorT<T>& input, ReluCtx<T>* ctx) {
    TensorT<T> out = TensorT<T>::zeros_like(input);
    for (size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    if (ctx) {
        ctx->input = input;
        ctx->valid = true;
    }
    return out;
}

template <class T>
TensorT<T> relu_backward(const ReluCtx<T>& ctx, const TensorT<T>& grad_out) {
    if (!ctx.valid) throw ContractViolation("relu_backward: missing forward context");
    TensorT<T> g = TensorT<T>::zeros_like(grad_out);
    for (size_t i = 0; i < grad_out.data.size(); ++i)
        g.data[i] = ctx.input.data[i] > T(0) ? grad_out.data[i] : T(0);
    return g;
}

template <class T>
TensorT<T> add_residual(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) throw ContractViolation("add_residual: shape mismatch");
    TensorT<T> out = TensorT<T>::zeros_like(a);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

template <class T>
TensorT<T> upsample2x(const TensorT<T>& input) {
    const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
    TensorT<T> out(n, c, 2 * h, 2 * w);
    for (int in = 0; in < n; ++in)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y) {
                const T* src = &input.data[input.index(in, ci, y, 0)];
                T* d0 = &out.data[out.index(in, ci, 2 * y, 0)];
                T* d1 = &out.data[out.index(in, ci, 2 * y + 1, 0)];
                for (int x = 0; x < w; ++x) {
                    d0[2 * x] = d0[2 * x + 1] = src[x];
                    d1[2 * x] = d1[2 * x + 1] = src[x];
                }
            }
    return out;
}

template <class T>
TensorT<T> upsample2x_backward(const TensorT<T>& grad_out) {
    const int n = grad_out.n(), c = grad_out.c(), h = grad_out.h() / 2, w = grad_out.w() / 2;
    if (grad_out.h() % 2 != 0 || grad_out.w() % 2 != 0)
        throw ContractViolation("upsample2x_backward: grad_out dims must be even");
    TensorT<T> g(n, c, h, w);
    for (int in = 0; in < n; ++in)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y) {
                const T* s0 = &grad_out.data[grad_out.index(in, ci, 2 * y, 0)];
                const T* s1 = &grad_out.data[grad_out.index(in, ci, 2 * y + 1, 0)];
                T* dst = &g.data[g.index(in, ci, y, 0)];
                for (int x = 0; x < w; ++x)
                    dst[x] = s0[2 * x] + s0[2 * x + 1] + s1[2 * x] + s1[2 * x + 1];
            }
    return g;
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& input, SigmoidCtx<T>* ctx) {
    TensorT<T> out = TensorT<T>::zeros_like(input);
    for (size_t i = 0; i < input.data.size(); ++i) {
        const T x = input.data[i];
        if (x >= T(0)) {
            out.data[i] = T(1) / (T(1) + std::exp(-x));
        } else {
            const T e = std::exp(x);
            out.data[i] = e / (T(1) + e);
        }
    }
    if (ctx) {
        ctx->output = out;
        ctx->valid = true;
    }
    return out;
}

template <class T>
TensorT<T> sigmoid_backward(const SigmoidCtx<T>& ctx, const TensorT<T>& grad_out) {
    if (!ctx.valid) throw ContractViolation("sigmoid_backward: missing forward context");
    TensorT<T> g = TensorT<T>::zeros_like(grad_out);
    for (size_t i = 0; i < grad_out.data.size(); ++i) {
        const T y = ctx.output.data[i];
        g.data[i] = y * (T(1) - y) * grad_out.data[i];
    }
    return g;
}

// --------------------------------------------------------------------------
// OpTape
// --------------------------------------------------------------------------

template <class T>
int OpTape<T>::push_leaf(TensorT<T> value) {
    nodes_.push_back(Node{"leaf", {}, nullptr});
    values_.push_back(std::move(value));
    return static_cast<int>(nodes_.size()) - 1;
}

template <class T>
int OpTape<T>::record(std::string op, std::vector<int> inputs, TensorT<T> output,
                      BackwardFn backward) {
    for (int s : inputs)
        if (s < 0 || s >= static_cast<int>(nodes_.size()))
            throw ContractViolation("OpTape: input slot out of range");
    nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(backward)});
    values_.push_back(std::move(output));
    return static_cast<int>(nodes_.size()) - 1;
}

template <class T>
void OpTape<T>::backward(int root, const TensorT<T>& seed) {
    if (root < 0 || root >= static_cast<int>(nodes_.size()))
        throw ContractViolation("OpTape: backward root out of range");
    if (!seed.same_shape(values_[static_cast<size_t>(root)]))
        throw ContractViolation("OpTape: seed shape mismatch");

    grads_.assign(nodes_.size(), TensorT<T>{});
    touched_.assign(nodes_.size(), 0);
    grads_[static_cast<size_t>(root)] = seed;
    touched_[static_cast<size_t>(root)] = 1;

    for (int i = root; i >= 0; --i) {
        if (!touched_[static_cast<size_t>(i)]) continue;
        const Node& node = nodes_[static_cast<size_t>(i)];
        if (!node.bwd) continue;  // leaf
        std::vector<TensorT<T>> input_grads = node.bwd(grads_[static_cast<size_t>(i)]);
        if (input_grads.size() != node.inputs.size())
            throw ContractViolation("OpTape: backward closure returned wrong arity for " + node.op);
        for (size_t j = 0; j < node.inputs.size(); ++j) {
            const int slot = node.inputs[j];
            TensorT<T>& acc = grads_[static_cast<size_t>(slot)];
            if (!touched_[static_cast<size_t>(slot)]) {
                acc = std::move(input_grads[j]);
                touched_[static_cast<size_t>(slot)] = 1;
            } else {
                if (!acc.same_shape(input_grads[j]))
                    throw ContractViolation("OpTape: gradient shape mismatch at slot");
                for (size_t k = 0; k < acc.data.size(); ++k)
                    acc.data[k] += input_grads[j].data[k];
            }
        }
    }
}

template <class T>
const TensorT<T>& OpTape<T>::grad(int slot) const {
    const size_t s = static_cast<size_t>(slot);
    if (s >= grads_.size() || !touched_[s]) {
        static const TensorT<T> empty{};
        return empty;
    }
    return grads_[s];
}

template <class T>
void OpTape<T>::clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    touched_.clear();
}

// Explicit instantiations: float for training/inference, double for the
// finite-difference harness.
#define BIOSEG_INSTANTIATE_OPS(T)                                                              \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,    \
                                  int, int, Conv2dCtx<T>*);                                    \
    template Conv2dGrads<T> conv2d_backward<T>(const Conv2dCtx<T>&, const TensorT<T>&);       \
    template TensorT<T> batchnorm2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, \
                                       TensorT<T>&, TensorT<T>&, Mode, T, T, BatchNormCtx<T>*); \
    template BatchNormGrads<T> batchnorm2d_backward<T>(const BatchNormCtx<T>&,                 \
                                                       const TensorT<T>&);                     \
    template TensorT<T> relu<T>(const TensorT<T>&, ReluCtx<T>*);                               \
    template TensorT<T> relu_backward<T>(const ReluCtx<T>&, const TensorT<T>&);                \
    template TensorT<T> add_residual<T>(const TensorT<T>&, const TensorT<T>&);                 \
    template TensorT<T> upsample2x<T>(const TensorT<T>&);                                      \
    template TensorT<T> upsample2x_backward<T>(const TensorT<T>&);                             \
    template TensorT<T> sigmoid<T>(const TensorT<T>&, SigmoidCtx<T>*);                         \
    template TensorT<T> sigmoid_backward<T>(const SigmoidCtx<T>&, const TensorT<T>&);          \
    template class OpTape<T>;

BIOSEG_INSTANTIATE_OPS(float)
BIOSEG_INSTANTIATE_OPS(double)

#undef BIOSEG_INSTANTIATE_OPS

}  // namespace bioseg::nn
