#include "bioseg/optim.hpp"

#include <cmath>

namespace bioseg {

template <class T>
void rmsprop_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& state_v,
                  const RmsPropConfig& config) {
    if (!param.same_shape(grad) || !param.same_shape(state_v))
        throw ContractViolation("rmsprop_step: shape mismatch");
    const T lr = static_cast<T>(config.lr);
    const T alpha = static_cast<T>(config.alpha);
    const T eps = static_cast<T>(config.eps);
    const T l2 = static_cast<T>(config.l2_decay);
    for (size_t i = 0; i < param.data.size(); ++i) {
        const T g = grad.data[i] + l2 * param.data[i];
        state_v.data[i] = alpha * state_v.data[i] + (T(1) - alpha) * g * g;
        param.data[i] -= lr * g / (std::sqrt(state_v.data[i]) + eps);
    }
}

void RmsProp::step(std::vector<std::pair<std::string, Tensor*>>& params) {
    if (state_.empty()) {
        state_.reserve(params.size());
        for (auto& [name, p] : params) {
            (void)name;
            state_.push_back(Tensor::zeros_like(*p));
        }
    }
    if (state_.size() != params.size())
        throw ContractViolation("RmsProp: parameter list changed between steps");
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor* p = params[i].second;
        if (p->grad.size() != p->data.size())
            throw ContractViolation("RmsProp: missing gradient for " + params[i].first);
        Tensor grad = Tensor::zeros_like(*p);
        grad.data = p->grad;
        rmsprop_step(*p, grad, state_[i], config_);
    }
}

template void rmsprop_step<float>(TensorT<float>&, const TensorT<float>&, TensorT<float>&,
                                  const RmsPropConfig&);
template void rmsprop_step<double>(TensorT<double>&, const TensorT<double>&, TensorT<double>&,
                                   const RmsPropConfig&);

}  // namespace bioseg
