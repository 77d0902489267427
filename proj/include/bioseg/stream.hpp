#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bioseg/image.hpp"
#include "bioseg/mask.hpp"
#include "bioseg/model.hpp"

namespace bioseg {

// Raw video model: ordered 16-bit frames plus header metadata.
struct FrameStream {
    int width = 0;
    int height = 0;
    float fps = 19.6f;
    std::vector<uint16_t> samples;  // n_frames * height * width, row-major per frame

    int n_frames() const {
        const size_t per = static_cast<size_t>(width) * height;
        return per == 0 ? 0 : static_cast<int>(samples.size() / per);
    }
    const uint16_t* frame(int i) const {
        return samples.data() + static_cast<size_t>(i) * width * height;
    }
    uint16_t* frame(int i) { return samples.data() + static_cast<size_t>(i) * width * height; }
};

struct GateSpec {
    int gate_frames = 0;
    int stride_frames = 0;  // 0 means stride = gate (disjoint windows)
};

// CVS1 container: magic "CVS1"; u32 width, u32 height, u32 n_frames, f32 fps,
// u8 bit depth (16), 3 reserved zero bytes; u16 little-endian samples.
FrameStream read_stream(const std::filesystem::path& path);
void write_stream(const FrameStream& stream, const std::filesystem::path& path);

// 64-bit integer frame sums over [start, start+count).
std::vector<int64_t> accumulate_raw(const FrameStream& stream, int start, int count);

// Sum then min-max normalize to [0,1].
ImageF accumulate(const FrameStream& stream, int start, int count);

struct Window {
    int start = 0;
    double duration_s = 0.0;
    ImageF image;
};

// Windows at starts 0, stride, 2*stride, ... while start+gate <= n_frames.
std::vector<Window> subcumulative_windows(const FrameStream& stream, const GateSpec& spec);

double gate_duration_seconds(int gate_frames, double fps);

// The (nr*patch) x (nc*patch) sub-image anchored at (row, col); nr, nc <= 4.
ImageF roi_crop_multiple(const ImageF& image, std::pair<int, int> anchor,
                         std::pair<int, int> n_patches, int patch = 224);

// Non-overlapping patch tiles through infer-mode forward, probabilities
// stitched back in place.
ImageF tiled_infer_probs(SegResNet& model, const ImageF& image);
BinaryMask tiled_infer(SegResNet& model, const ImageF& image, float theta = 0.5f);

struct LatencyStats {
    double mean_s = 0.0;
    double p50_s = 0.0;
    double p99_s = 0.0;
    std::vector<double> samples_s;
};

// Wall-clock timing of single-patch infer-mode forward passes.
LatencyStats measure_latency(SegResNet& model, int n_warmup, int n_trials);

void write_latency_csv(const LatencyStats& stats, const std::filesystem::path& path);

}  // namespace bioseg
