#pragma once

#include <cstdint>
#include <vector>

#include "bioseg/tensor.hpp"

namespace bioseg {

// 2-D binary mask, values strictly 0/1, stored as bytes.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values;

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0) {
        if (h < 0 || w < 0) throw ContractViolation("mask dims must be non-negative");
    }

    uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }

    size_t count() const {
        size_t c = 0;
        for (uint8_t v : values) c += v;
        return c;
    }

    bool same_shape(const BinaryMask& o) const { return height == o.height && width == o.width; }
    bool operator==(const BinaryMask& o) const = default;
};

// 2|A∩B| / (|A|+|B|); both empty -> 1.0
double dice_score(const BinaryMask& a, const BinaryMask& b);

// |A∩B| / |A∪B|; both empty -> 1.0
double iou_score(const BinaryMask& a, const BinaryMask& b);

// IoU of the boundary bands. band(M) = pixels of M within Chebyshev distance d
// of a non-mask pixel (the image border counts as background). Both bands
// empty -> 1.0.
double boundary_iou(const BinaryMask& a, const BinaryMask& b, int d = 2);

BinaryMask boundary_band(const BinaryMask& m, int d);

// Keeps only the maximal-area connected component; ties broken by the
// smallest row-major first-pixel index. Empty input stays empty.
BinaryMask largest_component(const BinaryMask& mask, int connectivity = 8);

// 1 where prob >= theta (inclusive threshold).
BinaryMask binarize(const std::vector<float>& prob, int height, int width, float theta = 0.5f);
BinaryMask binarize(const Tensor& prob, float theta = 0.5f);  // [1,1,h,w]

// Geometric helpers shared by augmentation and the robustness harness.
BinaryMask rot90_mask(const BinaryMask& m);   // 90 deg counterclockwise
BinaryMask rot180_mask(const BinaryMask& m);
BinaryMask rot270_mask(const BinaryMask& m);
BinaryMask hflip_mask(const BinaryMask& m);

}  // namespace bioseg
