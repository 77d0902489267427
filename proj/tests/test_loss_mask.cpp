#include <doctest.h>

#include <cmath>

#include "bioseg/loss.hpp"
#include "bioseg/mask.hpp"
#include "bioseg/rng.hpp"

using namespace bioseg;

namespace {

BinaryMask mask_from(int h, int w, const std::vector<uint8_t>& values) {
    BinaryMask m(h, w);
    REQUIRE(values.size() == m.values.size());
    m.values = values;
    return m;
}

BinaryMask random_mask(int h, int w, double p, Rng& rng) {
    BinaryMask m(h, w);
    for (auto& v : m.values) v = rng.uniform() < p ? 1 : 0;
    return m;
}

// independent band oracle: pixel of M within Chebyshev distance d of any
// non-mask pixel, counting everything outside the image as background
BinaryMask brute_force_band(const BinaryMask& m, int d) {
    BinaryMask band(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            bool near_bg = false;
            for (int dy = -d; dy <= d && !near_bg; ++dy)
                for (int dx = -d; dx <= d && !near_bg; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width || !m.at(ny, nx))
                        near_bg = true;
                }
            band.at(y, x) = near_bg ? 1 : 0;
        }
    return band;
}

double brute_force_boundary_iou(const BinaryMask& a, const BinaryMask& b, int d) {
    return iou_score(brute_force_band(a, d), brute_force_band(b, d));
}

}  // namespace

TEST_CASE("dice_loss: perfect prediction gives zero loss") {
    Tensor pred(2, 1, 4, 4), target(2, 1, 4, 4);
    Rng rng(21);
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const float v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
        pred.data[i] = v;
        target.data[i] = v;
    }
    CHECK(dice_loss(pred, target).value <= 1e-4);
}

TEST_CASE("dice_loss: all-empty prediction and target give zero by smoothing") {
    Tensor pred(1, 1, 3, 3), target(1, 1, 3, 3);
    CHECK(dice_loss(pred, target).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dice_loss: one shared pixel of two, one extra -> 0.5 in the smooth->0 limit") {
    // |T|=2, |P|=2, |P∩T|=1: dice = 2*1/(2+2) = 0.5, loss = 0.5
    Tensor pred(1, 1, 2, 2), target(1, 1, 2, 2);
    target.data = {1.0f, 1.0f, 0.0f, 0.0f};
    pred.data = {1.0f, 0.0f, 1.0f, 0.0f};
    CHECK(dice_loss(pred, target, 1e-9).value == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("bce_loss analytic values") {
    Tensor half(1, 1, 4, 4), target(1, 1, 4, 4);
    Rng rng(22);
    for (size_t i = 0; i < half.data.size(); ++i) {
        half.data[i] = 0.5f;
        target.data[i] = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    }
    CHECK(bce_loss(half, target).value == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    // p == t after clamping
    Tensor exact(1, 1, 2, 2), t2(1, 1, 2, 2);
    exact.data = {0.0f, 1.0f, 1.0f, 0.0f};
    t2.data = {0.0f, 1.0f, 1.0f, 0.0f};
    CHECK(bce_loss(exact, t2).value <= 2e-6);

    Tensor p9(1, 1, 1, 1), t1(1, 1, 1, 1);
    p9.data = {0.9f};
    t1.data = {1.0f};
    CHECK(bce_loss(p9, t1).value == doctest::Approx(-std::log(0.9)).epsilon(1e-6));
}

TEST_CASE("combined_loss is exactly the weighted recomposition") {
    Rng rng(23);
    Tensor pred(2, 1, 5, 5), target(2, 1, 5, 5);
    for (auto& v : pred.data) v = static_cast<float>(rng.uniform(0.02, 0.98));
    for (auto& v : target.data) v = rng.uniform() < 0.4 ? 1.0f : 0.0f;

    LossWeights w;  // lambda1 = 1, lambda2 = 0.1 defaults
    CHECK(w.lambda1 == doctest::Approx(1.0));
    CHECK(w.lambda2 == doctest::Approx(0.1));

    const double recomposed = w.lambda1 * dice_loss(pred, target, w.dice_smooth).value +
                              w.lambda2 * bce_loss(pred, target).value;
    CHECK(std::abs(combined_loss(pred, target, w).value - recomposed) < 1e-12);

    LossWeights dice_only{1.0, 0.0, 1e-5};
    CHECK(combined_loss(pred, target, dice_only).value ==
          doctest::Approx(dice_loss(pred, target, 1e-5).value).epsilon(1e-12));
}

TEST_CASE("dice_score and iou_score basics") {
    Rng rng(24);
    const BinaryMask a = random_mask(8, 8, 0.4, rng);
    CHECK(dice_score(a, a) == doctest::Approx(1.0));
    CHECK(iou_score(a, a) == doctest::Approx(1.0));

    const BinaryMask left = mask_from(1, 4, {1, 1, 0, 0});
    const BinaryMask right = mask_from(1, 4, {0, 0, 1, 1});
    CHECK(dice_score(left, right) == doctest::Approx(0.0));

    // |A|=|B|=2, |A∩B|=1
    const BinaryMask p = mask_from(1, 4, {1, 1, 0, 0});
    const BinaryMask q = mask_from(1, 4, {0, 1, 1, 0});
    CHECK(dice_score(p, q) == doctest::Approx(0.5));
    CHECK(iou_score(p, q) == doctest::Approx(1.0 / 3.0));

    BinaryMask other_shape(2, 2);
    CHECK_THROWS_AS((void)dice_score(p, other_shape), ContractViolation);
}

TEST_CASE("empty-empty metrics are 1.0 by convention") {
    BinaryMask e1(4, 4), e2(4, 4);
    CHECK(dice_score(e1, e2) == doctest::Approx(1.0));
    CHECK(iou_score(e1, e2) == doctest::Approx(1.0));
    CHECK(boundary_iou(e1, e2, 2) == doctest::Approx(1.0));
}

TEST_CASE("dice = 2*iou/(1+iou) on 100 random pairs, and metrics are symmetric in [0,1]") {
    Rng rng(25);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = rng.uniform_int(1, 12), w = rng.uniform_int(1, 12);
        const BinaryMask a = random_mask(h, w, rng.uniform(0.1, 0.9), rng);
        const BinaryMask b = random_mask(h, w, rng.uniform(0.1, 0.9), rng);
        const double d = dice_score(a, b), i = iou_score(a, b);
        CHECK(std::abs(d - 2.0 * i / (1.0 + i)) < 1e-12);
        CHECK(d == doctest::Approx(dice_score(b, a)));
        CHECK(i == doctest::Approx(iou_score(b, a)));
        CHECK(boundary_iou(a, b, 2) == doctest::Approx(boundary_iou(b, a, 2)));
        CHECK((d >= 0.0 && d <= 1.0));
        CHECK((i >= 0.0 && i <= 1.0));
    }
}

TEST_CASE("boundary_iou matches the brute-force band oracle") {
    // two filled 5x5 squares offset by one pixel inside a 8x8 frame
    BinaryMask a(8, 8), b(8, 8);
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x) a.at(y, x) = 1;
    for (int y = 2; y <= 6; ++y)
        for (int x = 2; x <= 6; ++x) b.at(y, x) = 1;

    CHECK(boundary_iou(a, a, 1) == doctest::Approx(1.0));
    CHECK(boundary_iou(a, b, 1) == doctest::Approx(brute_force_boundary_iou(a, b, 1)));
    CHECK(boundary_iou(a, b, 2) == doctest::Approx(brute_force_boundary_iou(a, b, 2)));
}

TEST_CASE("boundary band of a full mask is the border ring") {
    BinaryMask full(6, 7);
    for (auto& v : full.values) v = 1;
    const BinaryMask band = boundary_band(full, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 7; ++x) {
            const bool border = y == 0 || y == 5 || x == 0 || x == 6;
            CHECK(band.at(y, x) == (border ? 1 : 0));
        }
}

TEST_CASE("boundary_iou with huge d reduces to plain iou") {
    Rng rng(26);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = rng.uniform_int(2, 10), w = rng.uniform_int(2, 10);
        const BinaryMask a = random_mask(h, w, 0.5, rng);
        const BinaryMask b = random_mask(h, w, 0.5, rng);
        const int d = h + w;  // at least the diagonal in Chebyshev terms
        CHECK(boundary_iou(a, b, d) == doctest::Approx(iou_score(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("largest_component keeps the maximal component") {
    BinaryMask single(5, 5);
    single.at(1, 1) = single.at(1, 2) = single.at(2, 1) = 1;
    CHECK(largest_component(single) == single);

    // 5-pixel component beats a 3-pixel one
    BinaryMask two(5, 8);
    for (int x = 0; x < 5; ++x) two.at(0, x) = 1;
    for (int x = 5; x < 8; ++x) two.at(4, x) = 1;
    const BinaryMask kept = largest_component(two);
    CHECK(kept.count() == 5);
    CHECK(kept.at(0, 0) == 1);
    CHECK(kept.at(4, 5) == 0);

    BinaryMask empty(4, 4);
    CHECK(largest_component(empty).count() == 0);
}

TEST_CASE("largest_component breaks ties by first row-major pixel") {
    BinaryMask tie(3, 5);
    tie.at(0, 0) = tie.at(0, 1) = 1;  // first two-pixel component
    tie.at(2, 3) = tie.at(2, 4) = 1;  // second two-pixel component
    const BinaryMask kept = largest_component(tie);
    CHECK(kept.at(0, 0) == 1);
    CHECK(kept.at(2, 3) == 0);
}

TEST_CASE("largest_component respects 4 vs 8 connectivity") {
    BinaryMask diag(2, 2);
    diag.at(0, 0) = diag.at(1, 1) = 1;
    CHECK(largest_component(diag, 8).count() == 2);
    CHECK(largest_component(diag, 4).count() == 1);
}

TEST_CASE("binarize: inclusive threshold, empty case and complement property") {
    Tensor prob(1, 1, 1, 3);
    prob.data = {0.5f, 0.49f, 0.51f};
    const BinaryMask m = binarize(prob, 0.5f);
    CHECK(m.values == std::vector<uint8_t>{1, 0, 1});

    Tensor zeros(1, 1, 2, 2);
    CHECK(binarize(zeros, 0.5f).count() == 0);

    Rng rng(27);
    Tensor random(1, 1, 6, 6);
    for (auto& v : random.data) {
        do {
            v = static_cast<float>(rng.uniform());
        } while (std::abs(v - 0.5f) < 1e-5f);  // keep values away from the threshold
    }
    const BinaryMask pos = binarize(random, 0.5f);
    Tensor inverted = random;
    for (auto& v : inverted.data) v = 1.0f - v;
    const BinaryMask neg = binarize(inverted, 0.5f + 1e-6f);
    for (size_t i = 0; i < pos.values.size(); ++i) CHECK(pos.values[i] == (1 - neg.values[i]));
}
