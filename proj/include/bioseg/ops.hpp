#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bioseg/tensor.hpp"

namespace bioseg::nn {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// conv2d: cross-correlation (no kernel flip), zero padding, stride 1 or 2.
// input [n,cin,h,w], weight [cout,cin,k,k], bias [1,cout,1,1].
// out[n,o,y,x] = bias[o] + sum_{i,dy,dx} in[n,i,y*s+dy-p, x*s+dx-p] * w[o,i,dy,dx]
// ---------------------------------------------------------------------------

template <class T>
struct Conv2dCtx {
    TensorT<T> input;
    TensorT<T> weight;
    int stride = 1;
    int padding = 0;
    bool valid = false;
};

template <class T>
struct Conv2dGrads {
    TensorT<T> input;
    TensorT<T> weight;
    TensorT<T> bias;
};

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding, Conv2dCtx<T>* ctx = nullptr);

template <class T>
Conv2dGrads<T> conv2d_backward(const Conv2dCtx<T>& ctx, const TensorT<T>& grad_out);

// ---------------------------------------------------------------------------
// batchnorm2d: per-channel normalization. Train mode uses biased batch
// statistics and updates running stats as run = (1-momentum)*run +
// momentum*batch; infer mode normalizes with the running stats.
// gamma/beta/running stats have shape [1,c,1,1].
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormCtx {
    TensorT<T> input;
    TensorT<T> gamma;
    std::vector<T> mean;    // per channel, batch statistics
    std::vector<T> var;     // biased
    T eps = T(1e-5);
    bool valid = false;
};

template <class T>
struct BatchNormGrads {
    TensorT<T> input;
    TensorT<T> gamma;
    TensorT<T> beta;
};

template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& input, const TensorT<T>& gamma, const TensorT<T>& beta,
                       TensorT<T>& running_mean, TensorT<T>& running_var, Mode mode, T momentum,
                       T eps, BatchNormCtx<T>* ctx = nullptr);

template <class T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCtx<T>& ctx, const TensorT<T>& grad_out);

// ---------------------------------------------------------------------------
// relu: elementwise max(0,x); the subgradient at exactly 0 is 0.
// ---------------------------------------------------------------------------

template <class T>
struct ReluCtx {
    TensorT<T> input;
    bool valid = false;
};

template <class T>
TensorT<T> relu(const TensorT<T>& input, ReluCtx<T>* ctx = nullptr);

template <class T>
TensorT<T> relu_backward(const ReluCtx<T>& ctx, const TensorT<T>& grad_out);

// ---------------------------------------------------------------------------
// add_residual: elementwise sum of identically shaped tensors; the backward
// routes grad_out to both inputs unchanged.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> add_residual(const TensorT<T>& a, const TensorT<T>& b);

// ---------------------------------------------------------------------------
// upsample2x: nearest-neighbor 2x2 replication; backward sums the four child
// gradients into each parent cell.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> upsample2x(const TensorT<T>& input);

template <class T>
TensorT<T> upsample2x_backward(const TensorT<T>& grad_out);

// ---------------------------------------------------------------------------
// sigmoid: 1/(1+e^-x), numerically stable at large |x|.
// ---------------------------------------------------------------------------

template <class T>
struct SigmoidCtx {
    TensorT<T> output;
    bool valid = false;
};

template <class T>
TensorT<T> sigmoid(const TensorT<T>& input, SigmoidCtx<T>* ctx = nullptr);

template <class T>
TensorT<T> sigmoid_backward(const SigmoidCtx<T>& ctx, const TensorT<T>& grad_out);

// ---------------------------------------------------------------------------
// OpTape: ordered record of executed ops. backward() traverses in exact
// reverse execution order and accumulates gradients per slot. Leaves are
// pushed explicitly (parameters, network input).
// ---------------------------------------------------------------------------

template <class T>
class OpTape {
public:
    // A backward closure maps the output gradient to one gradient per input slot.
    using BackwardFn = std::function<std::vector<TensorT<T>>(const TensorT<T>&)>;

    int push_leaf(TensorT<T> value);
    int record(std::string op, std::vector<int> inputs, TensorT<T> output, BackwardFn backward);

    void backward(int root, const TensorT<T>& seed);

    const TensorT<T>& value(int slot) const { return values_.at(static_cast<size_t>(slot)); }
    const TensorT<T>& grad(int slot) const;
    const std::string& op_name(int slot) const { return nodes_.at(static_cast<size_t>(slot)).op; }

    size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        std::string op;  // "leaf" for leaves
        std::vector<int> inputs;
        BackwardFn bwd;
    };

    std::vector<Node> nodes_;
    std::vector<TensorT<T>> values_;
    std::vector<TensorT<T>> grads_;
    std::vector<char> touched_;
};

}  // namespace bioseg::nn
