#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bioseg/image.hpp"
#include "bioseg/mask.hpp"
#include "bioseg/model.hpp"
#include "bioseg/report.hpp"
#include "bioseg/stream.hpp"

namespace bioseg {

// Anything that maps a patch-multiple image to a binary mask. The model-backed
// implementation runs tiled inference; tests may plug in oracles.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual BinaryMask segment(const ImageF& image) = 0;
};

class ModelSegmenter : public Segmenter {
public:
    explicit ModelSegmenter(SegResNet model, float theta = 0.5f)
        : model_(std::move(model)), theta_(theta) {}

    BinaryMask segment(const ImageF& image) override {
        return tiled_infer(model_, image, theta_);
    }

    SegResNet& model() { return model_; }

private:
    SegResNet model_;
    float theta_;
};

struct RobustnessOptions {
    double noise_sigma = 0.10;
    bool use_largest_component = true;
    uint64_t seed = 0;
};

struct RobustnessSummary {
    std::string transform;
    SummaryStats dice;
};

struct RobustnessResult {
    Report report;
    std::vector<RobustnessSummary> summaries;
};

// Reference = (largest component of) the prediction on the clean image. Each
// transform is applied to the input, the prediction is mapped back through
// the inverse geometric transform and compared to the reference with Dice.
// Transforms: rot90, rot180, gaussian noise (no inversion for noise).
RobustnessResult run_robustness(Segmenter& segmenter, const std::vector<ImageF>& test_images,
                                const RobustnessOptions& options = {});

struct ConsistencyResult {
    Report report;
    std::vector<double> pairwise_dice;
    std::vector<double> pairwise_boundary_iou;
    std::vector<double> run_seconds;
};

// n_repeats independent runs with a freshly constructed segmenter each time
// (the factory models a fresh weight load); pairwise Dice and boundary IoU
// among the repeats plus per-run wall-clock seconds.
ConsistencyResult run_consistency(const std::function<std::unique_ptr<Segmenter>()>& make_segmenter,
                                  const ImageF& image, int n_repeats = 3, int boundary_d = 2,
                                  uint64_t seed = 0);

struct SubcumulativeGate {
    int gate_frames = 0;
    double duration_s = 0.0;
    SummaryStats dice;
};

struct SubcumulativeResult {
    Report report;
    std::vector<SubcumulativeGate> gates;
};

// Reference mask from the full cumulative image; per gate, Dice of every
// window's mask against the reference, with mean and standard error.
SubcumulativeResult run_subcumulative(Segmenter& segmenter, const FrameStream& stream,
                                      const std::vector<int>& gates, int stride = 0,
                                      uint64_t seed = 0);

std::vector<int> default_gates();  // {10, 20, ..., 120}

}  // namespace bioseg
