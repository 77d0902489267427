#include "bioseg/mask.hpp"

#include <algorithm>
#include <queue>

namespace bioseg {

namespace {

struct OverlapCounts {
    size_t a = 0, b = 0, inter = 0;
};

OverlapCounts count_overlap(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw ContractViolation("mask metric: shape mismatch");
    OverlapCounts c;
    for (size_t i = 0; i < a.values.size(); ++i) {
        c.a += a.values[i];
        c.b += b.values[i];
        c.inter += static_cast<size_t>(a.values[i] & b.values[i]);
    }
    return c;
}

}  // namespace

double dice_score(const BinaryMask& a, const BinaryMask& b) {
    const OverlapCounts c = count_overlap(a, b);
    if (c.a + c.b == 0) return 1.0;
    return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.a + c.b);
}

double iou_score(const BinaryMask& a, const BinaryMask& b) {
    const OverlapCounts c = count_overlap(a, b);
    const size_t uni = c.a + c.b - c.inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.inter) / static_cast<double>(uni);
}

BinaryMask boundary_band(const BinaryMask& m, int d) {
    if (d < 1) throw ContractViolation("boundary_band: d must be >= 1");
    const int h = m.height, w = m.width;
    BinaryMask band(h, w);

    // Chebyshev distance to the nearest background pixel (out-of-image counts
    // as background), via two-pass chamfer sweep.
    const int inf = h + w + 2;
    std::vector<int> dist(static_cast<size_t>(h) * w, inf);
    auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.at(y, x)) {
                dist[idx(y, x)] = 0;
                continue;
            }
            int best = inf;
            // virtual background just outside the image
            best = std::min(best, std::min(std::min(y + 1, h - y), std::min(x + 1, w - x)));
            if (y > 0) {
                best = std::min(best, dist[idx(y - 1, x)] + 1);
                if (x > 0) best = std::min(best, dist[idx(y - 1, x - 1)] + 1);
                if (x + 1 < w) best = std::min(best, dist[idx(y - 1, x + 1)] + 1);
            }
            if (x > 0) best = std::min(best, dist[idx(y, x - 1)] + 1);
            dist[idx(y, x)] = best;
        }
    for (int y = h - 1; y >= 0; --y)
        for (int x = w - 1; x >= 0; --x) {
            if (!m.at(y, x)) continue;
            int best = dist[idx(y, x)];
            if (y + 1 < h) {
                best = std::min(best, dist[idx(y + 1, x)] + 1);
                if (x > 0) best = std::min(best, dist[idx(y + 1, x - 1)] + 1);
                if (x + 1 < w) best = std::min(best, dist[idx(y + 1, x + 1)] + 1);
            }
            if (x + 1 < w) best = std::min(best, dist[idx(y, x + 1)] + 1);
            dist[idx(y, x)] = best;
        }

    for (size_t i = 0; i < band.values.size(); ++i)
        band.values[i] = (m.values[i] && dist[i] <= d) ? 1 : 0;
    return band;
}

double boundary_iou(const BinaryMask& a, const BinaryMask& b, int d) {
    if (!a.same_shape(b)) throw ContractViolation("boundary_iou: shape mismatch");
    const BinaryMask ba = boundary_band(a, d);
    const BinaryMask bb = boundary_band(b, d);
    return iou_score(ba, bb);
}

BinaryMask largest_component(const BinaryMask& mask, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw ContractViolation("largest_component: connectivity must be 4 or 8");

    const int h = mask.height, w = mask.width;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    size_t best_area = 0;
    size_t best_first = 0;
    int best_label = -1;
    int next_label = 0;

    std::vector<size_t> stack;
    for (size_t start = 0; start < mask.values.size(); ++start) {
        if (!mask.values[start] || label[start] >= 0) continue;
        const int cur = next_label++;
        size_t area = 0;
        stack.clear();
        stack.push_back(start);
        label[start] = cur;
        while (!stack.empty()) {
            const size_t p = stack.back();
            stack.pop_back();
            ++area;
            const int y = static_cast<int>(p) / w;
            const int x = static_cast<int>(p) % w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    if (connectivity == 4 && dy != 0 && dx != 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const size_t np = static_cast<size_t>(ny) * w + nx;
                    if (!mask.values[np] || label[np] >= 0) continue;
                    label[np] = cur;
                    stack.push_back(np);
                }
        }
        // ties: components are discovered in row-major first-pixel order, so
        // strict > keeps the earlier one
        if (area > best_area) {
            best_area = area;
            best_first = start;
            best_label = cur;
        }
    }
    (void)best_first;

    BinaryMask out(h, w);
    if (best_label >= 0)
        for (size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = label[i] == best_label ? 1 : 0;
    return out;
}

BinaryMask binarize(const std::vector<float>& prob, int height, int width, float theta) {
    if (theta <= 0.0f || theta >= 1.0f) throw ContractViolation("binarize: theta must be in (0,1)");
    if (prob.size() != static_cast<size_t>(height) * width)
        throw ContractViolation("binarize: buffer size does not match dims");
    BinaryMask m(height, width);
    for (size_t i = 0; i < prob.size(); ++i) m.values[i] = prob[i] >= theta ? 1 : 0;
    return m;
}

BinaryMask binarize(const Tensor& prob, float theta) {
    if (prob.n() != 1 || prob.c() != 1)
        throw ContractViolation("binarize: expected a [1,1,h,w] tensor");
    return binarize(prob.data, prob.h(), prob.w(), theta);
}

BinaryMask rot90_mask(const BinaryMask& m) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(m.width - 1 - x, y) = m.at(y, x);
    return out;
}

BinaryMask rot180_mask(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(m.height - 1 - y, m.width - 1 - x) = m.at(y, x);
    return out;
}

BinaryMask rot270_mask(const BinaryMask& m) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(x, m.height - 1 - y) = m.at(y, x);
    return out;
}

BinaryMask hflip_mask(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(y, m.width - 1 - x) = m.at(y, x);
    return out;
}

}  // namespace bioseg
