#include "bioseg/loss.hpp"

#include <cmath>

namespace bioseg {

template <class T>
LossValueGrad<T> dice_loss(const TensorT<T>& pred, const TensorT<T>& target, double smooth) {
    if (!pred.same_shape(target)) throw ContractViolation("dice_loss: shape mismatch");
    if (smooth <= 0.0) throw ContractViolation("dice_loss: smooth must be positive");
    const int n = pred.n();
    if (n == 0) throw ContractViolation("dice_loss: empty batch");
    const size_t per = pred.size() / static_cast<size_t>(n);

    LossValueGrad<T> out;
    out.grad = TensorT<T>::zeros_like(pred);

    double total = 0.0;
    for (int s = 0; s < n; ++s) {
        const size_t off = static_cast<size_t>(s) * per;
        double sum_pt = 0.0, sum_p = 0.0, sum_t = 0.0;
        for (size_t i = 0; i < per; ++i) {
            const double p = pred.data[off + i];
            const double t = target.data[off + i];
            sum_pt += p * t;
            sum_p += p;
            sum_t += t;
        }
        const double num = 2.0 * sum_pt + smooth;
        const double den = sum_p + sum_t + smooth;
        total += 1.0 - num / den;

        // d/dp_i [1 - num/den] = -(2*t_i*den - num) / den^2, averaged over batch
        const double inv_den2 = 1.0 / (den * den);
        for (size_t i = 0; i < per; ++i) {
            const double t = target.data[off + i];
            out.grad.data[off + i] =
                static_cast<T>(-(2.0 * t * den - num) * inv_den2 / static_cast<double>(n));
        }
    }
    out.value = total / static_cast<double>(n);
    return out;
}

template <class T>
LossValueGrad<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    if (!pred.same_shape(target)) throw ContractViolation("bce_loss: shape mismatch");
    if (pred.size() == 0) throw ContractViolation("bce_loss: empty input");

    constexpr double lo = 1e-7;
    constexpr double hi = 1.0 - 1e-7;
    const double inv_n = 1.0 / static_cast<double>(pred.size());

    LossValueGrad<T> out;
    out.grad = TensorT<T>::zeros_like(pred);

    double total = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double raw = pred.data[i];
        const double p = raw < lo ? lo : (raw > hi ? hi : raw);
        const double t = target.data[i];
        total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        // zero gradient where the clamp is active
        if (raw > lo && raw < hi)
            out.grad.data[i] = static_cast<T>((p - t) / (p * (1.0 - p)) * inv_n);
    }
    out.value = total * inv_n;
    return out;
}

template <class T>
LossValueGrad<T> combined_loss(const TensorT<T>& pred, const TensorT<T>& target,
                               const LossWeights& weights) {
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0)
        throw ContractViolation("combined_loss: lambda weights must be non-negative");
    const LossValueGrad<T> d = dice_loss(pred, target, weights.dice_smooth);
    const LossValueGrad<T> b = bce_loss(pred, target);

    LossValueGrad<T> out;
    out.value = weights.lambda1 * d.value + weights.lambda2 * b.value;
    out.grad = TensorT<T>::zeros_like(pred);
    for (size_t i = 0; i < pred.size(); ++i)
        out.grad.data[i] = static_cast<T>(weights.lambda1 * d.grad.data[i] +
                                          weights.lambda2 * b.grad.data[i]);
    return out;
}

Tensor masks_to_target(const std::vector<BinaryMask>& masks) {
    if (masks.empty()) throw ContractViolation("masks_to_target: empty batch");
    const int h = masks[0].height, w = masks[0].width;
    Tensor t(static_cast<int>(masks.size()), 1, h, w);
    for (size_t s = 0; s < masks.size(); ++s) {
        if (masks[s].height != h || masks[s].width != w)
            throw ContractViolation("masks_to_target: inconsistent mask shapes");
        const size_t off = s * static_cast<size_t>(h) * w;
        for (size_t i = 0; i < masks[s].values.size(); ++i)
            t.data[off + i] = static_cast<float>(masks[s].values[i]);
    }
    return t;
}

template LossValueGrad<float> dice_loss<float>(const TensorT<float>&, const TensorT<float>&,
                                               double);
template LossValueGrad<double> dice_loss<double>(const TensorT<double>&, const TensorT<double>&,
                                                 double);
template LossValueGrad<float> bce_loss<float>(const TensorT<float>&, const TensorT<float>&);
template LossValueGrad<double> bce_loss<double>(const TensorT<double>&, const TensorT<double>&);
template LossValueGrad<float> combined_loss<float>(const TensorT<float>&, const TensorT<float>&,
                                                   const LossWeights&);
template LossValueGrad<double> combined_loss<double>(const TensorT<double>&,
                                                     const TensorT<double>&, const LossWeights&);

}  // namespace bioseg
