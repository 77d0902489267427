#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "bioseg/error.hpp"

namespace bioseg {

// Rank-4 (batch, channel, height, width) row-major tensor with an optional
// same-shape gradient buffer. Float for production math, double for the
// finite-difference harness.
template <class T>
struct TensorT {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<T> data;
    std::vector<T> grad;  // empty when absent

    TensorT() = default;

    TensorT(int n, int c, int h, int w) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw ContractViolation("tensor dims must be non-negative");
        shape = {n, c, h, w};
        data.assign(static_cast<size_t>(n) * c * h * w, T(0));
    }

    static TensorT zeros_like(const TensorT& o) {
        TensorT t;
        t.shape = o.shape;
        t.data.assign(o.data.size(), T(0));
        return t;
    }

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }
    size_t size() const { return data.size(); }

    size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * shape[1] + ic) * shape[2] + iy) * shape[3] + ix;
    }

    T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    const T& at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (!grad.empty()) grad.assign(grad.size(), T(0));
    }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class To, class From>
TensorT<To> tensor_cast(const TensorT<From>& src) {
    TensorT<To> out(src.n(), src.c(), src.h(), src.w());
    for (size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
    return out;
}

}  // namespace bioseg
