#pragma once

#include "bioseg/mask.hpp"
#include "bioseg/tensor.hpp"

namespace bioseg {

struct LossWeights {
    double lambda1 = 1.0;       // Dice term
    double lambda2 = 0.1;       // cross-entropy term
    double dice_smooth = 1e-5;
};

template <class T>
struct LossValueGrad {
    double value = 0.0;
    TensorT<T> grad;  // d value / d pred
};

// Soft Dice loss, averaged per sample over the batch:
//   1 - (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth)
// target holds 0/1 values with the same shape as pred.
template <class T>
LossValueGrad<T> dice_loss(const TensorT<T>& pred, const TensorT<T>& target, double smooth = 1e-5);

// Mean binary cross entropy; pred is clamped into [1e-7, 1-1e-7] before logs.
template <class T>
LossValueGrad<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& target);

// lambda1 * dice + lambda2 * bce with the weighted-sum gradient.
template <class T>
LossValueGrad<T> combined_loss(const TensorT<T>& pred, const TensorT<T>& target,
                               const LossWeights& weights);

// Packs a batch of masks into a 0/1 target tensor [n,1,h,w].
Tensor masks_to_target(const std::vector<BinaryMask>& masks);

}  // namespace bioseg
