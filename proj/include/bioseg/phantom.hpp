#pragma once

#include <cstdint>

#include "bioseg/image.hpp"
#include "bioseg/mask.hpp"
#include "bioseg/stream.hpp"

namespace bioseg {

enum class PhantomStyle { source, target };

PhantomStyle style_from_name(const std::string& s);
std::string style_name(PhantomStyle s);

// Synthetic vessel phantom controls. Source style: dark vessels over a
// bright, smoothly textured background. Target style: dark vessels inside a
// bright beam-shaped region over a dark surround, with intensity-dependent
// grain.
struct PhantomParams {
    int size = 224;
    int n_trees = 3;
    double branch_prob = 0.03;
    double radius_min = 2.0;
    double radius_max = 5.0;
    double vessel_contrast = 0.55;     // fractional darkening of vessel pixels
    double background_gradient = 0.15;
    PhantomStyle style = PhantomStyle::source;
    uint64_t seed = 0;

    void validate() const;
};

enum class MotionKind { motion_static, sinusoidal };

struct MotionModel {
    double amplitude_px = 0.0;
    double period_s = 4.0;
    MotionKind kind = MotionKind::motion_static;

    void validate() const;
};

struct Phantom {
    ImageF image;     // min-max normalized to [0,1]
    BinaryMask mask;  // exact rasterized tube support
};

// Deterministic per (params, seed): vessel trees drawn as smoothed
// random-walk tubes with tapering radius; the mask is the exact union of the
// rasterized disks.
Phantom gen_phantom(const PhantomParams& params);

// Pre-rounding displacement in pixels at time t.
double motion_displacement(const MotionModel& motion, double t);

// Per-frame render: the phantom shifted by the rounded motion displacement,
// scaled to full 16-bit range, plus signal-dependent Gaussian noise. The
// shift is applied along the row axis.
FrameStream gen_stream(const ImageF& phantom, const BinaryMask& mask, int n_frames, double fps,
                       const MotionModel& motion, double noise_scale, uint64_t seed);

}  // namespace bioseg
