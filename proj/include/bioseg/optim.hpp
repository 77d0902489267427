#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bioseg/tensor.hpp"

namespace bioseg {

struct RmsPropConfig {
    double lr = 1e-5;
    double alpha = 0.99;   // squared-gradient decay
    double eps = 1e-8;
    double l2_decay = 0.0;  // additive gradient decay
};

// One elementwise update:
//   g' = grad + l2_decay * param
//   v  = alpha * v + (1 - alpha) * g'^2
//   param -= lr * g' / (sqrt(v) + eps)
template <class T>
void rmsprop_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& state_v,
                  const RmsPropConfig& config);

// Keeps one squared-gradient accumulator per parameter, in parameter order.
class RmsProp {
public:
    explicit RmsProp(RmsPropConfig config) : config_(config) {}

    // params carry their gradients in the tensor grad buffer
    void step(std::vector<std::pair<std::string, Tensor*>>& params);

    const RmsPropConfig& config() const { return config_; }

private:
    RmsPropConfig config_;
    std::vector<Tensor> state_;
};

}  // namespace bioseg
