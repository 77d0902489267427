#include "bioseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bioseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Walker {
    double y, x, theta, radius, taper;
    int steps_left;
    int depth;
};

struct BeamRegion {
    double cy, cx, ry, rx;

    // squared normalized elliptical radius; <= 1 means inside
    double rho2(double y, double x) const {
        const double dy = (y - cy) / ry;
        const double dx = (x - cx) / rx;
        return dy * dy + dx * dx;
    }
    bool contains(double y, double x) const { return rho2(y, x) <= 1.0; }
};

void rasterize_disk(BinaryMask& mask, double cy, double cx, double r) {
    const int lo_y = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int hi_y = std::min(mask.height - 1, static_cast<int>(std::ceil(cy + r)));
    const int lo_x = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int hi_x = std::min(mask.width - 1, static_cast<int>(std::ceil(cx + r)));
    const double r2 = r * r;
    for (int y = lo_y; y <= hi_y; ++y)
        for (int x = lo_x; x <= hi_x; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx <= r2) mask.at(y, x) = 1;
        }
}

ImageF blur3x3(const ImageF& im) {
    static const int kernel[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
    ImageF out(im.height, im.width);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double acc = 0.0;
            int weight = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= im.height || nx < 0 || nx >= im.width) continue;
                    const int k = kernel[dy + 1][dx + 1];
                    acc += k * im.at(ny, nx);
                    weight += k;
                }
            out.at(y, x) = static_cast<float>(acc / weight);
        }
    return out;
}

}  // namespace

PhantomStyle style_from_name(const std::string& s) {
    if (s == "source") return PhantomStyle::source;
    if (s == "target") return PhantomStyle::target;
    throw ContractViolation("unknown phantom style '" + s + "' (expected source|target)");
}

std::string style_name(PhantomStyle s) {
    return s == PhantomStyle::source ? "source" : "target";
}

void PhantomParams::validate() const {
    if (size < 32) throw ContractViolation("PhantomParams: size >= 32 violated");
    if (n_trees < 0) throw ContractViolation("PhantomParams: n_trees must be non-negative");
    if (radius_min < 1.0) throw ContractViolation("PhantomParams: radius >= 1 px violated");
    if (radius_max < radius_min) throw ContractViolation("PhantomParams: radius range inverted");
    if (vessel_contrast <= 0.0 || vessel_contrast > 1.0)
        throw ContractViolation("PhantomParams: contrast in (0,1] violated");
    if (branch_prob < 0.0 || branch_prob > 1.0)
        throw ContractViolation("PhantomParams: branch_prob must lie in [0,1]");
}

void MotionModel::validate() const {
    if (amplitude_px < 0.0) throw ContractViolation("MotionModel: amplitude must be >= 0");
    if (kind == MotionKind::sinusoidal && period_s <= 0.0)
        throw ContractViolation("MotionModel: period must be positive for sinusoidal motion");
}

Phantom gen_phantom(const PhantomParams& params) {
    params.validate();
    Rng rng(params.seed);
    const int size = params.size;
    const bool beam_style = params.style == PhantomStyle::target;

    BeamRegion beam{};
    if (beam_style) {
        beam.cy = size * rng.uniform(0.45, 0.55);
        beam.cx = size * rng.uniform(0.45, 0.55);
        beam.ry = size * rng.uniform(0.32, 0.42);
        beam.rx = size * rng.uniform(0.32, 0.42);
    }
    auto allowed = [&](double y, double x) {
        if (y < 1 || x < 1 || y > size - 2 || x > size - 2) return false;
        return !beam_style || beam.contains(y, x);
    };
    auto good_start = [&](double y, double x) {
        if (y < 3 || x < 3 || y > size - 4 || x > size - 4) return false;
        return !beam_style || beam.rho2(y, x) <= 0.64;  // inner 80% of the beam
    };

    // --- vessel walk ---
    BinaryMask mask(size, size);
    std::vector<Walker> stack;
    for (int tree = 0; tree < params.n_trees; ++tree) {
        Walker w{};
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            w.y = rng.uniform(2.0, size - 3.0);
            w.x = rng.uniform(2.0, size - 3.0);
            placed = good_start(w.y, w.x);
        }
        if (!placed) {
            w.y = size / 2.0;
            w.x = size / 2.0;
        }
        w.theta = rng.uniform(0.0, 2.0 * kPi);
        w.radius = rng.uniform(params.radius_min, params.radius_max);
        w.steps_left = static_cast<int>(size * rng.uniform(0.7, 1.2));
        w.taper = std::max(1.0, 0.35 * w.radius);
        w.depth = 0;
        stack.push_back(w);

        while (!stack.empty()) {
            Walker cur = stack.back();
            stack.pop_back();
            const int total = std::max(cur.steps_left, 1);
            for (int step = 0; step < total; ++step) {
                const double t = static_cast<double>(step) / total;
                const double r = cur.radius + (cur.taper - cur.radius) * t;
                rasterize_disk(mask, cur.y, cur.x, r);
                cur.theta += 0.18 * rng.normal();
                cur.y += std::sin(cur.theta);
                cur.x += std::cos(cur.theta);
                if (!allowed(cur.y, cur.x)) break;
                if (cur.depth < 2 && r > 1.5 && total - step > 12 &&
                    rng.uniform() < params.branch_prob) {
                    Walker child = cur;
                    child.theta += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.1);
                    child.radius = r * rng.uniform(0.55, 0.8);
                    child.taper = std::max(1.0, 0.35 * child.radius);
                    child.steps_left = static_cast<int>((total - step) * rng.uniform(0.25, 0.45));
                    child.depth = cur.depth + 1;
                    if (child.radius >= 1.0 && child.steps_left > 6) stack.push_back(child);
                }
            }
        }
    }

    // --- rendering ---
    ImageF img(size, size);
    if (!beam_style) {
        const double ga = rng.uniform(-1.0, 1.0), gb = rng.uniform(-1.0, 1.0);
        double cs[3], fy[3], fx[3], ph[3];
        for (int k = 0; k < 3; ++k) {
            cs[k] = rng.uniform(0.01, 0.04);
            fy[k] = rng.uniform(1.0, 4.0);
            fx[k] = rng.uniform(1.0, 4.0);
            ph[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double bg = 0.85 + params.background_gradient *
                                       (ga * (static_cast<double>(y) / size - 0.5) +
                                        gb * (static_cast<double>(x) / size - 0.5));
                for (int k = 0; k < 3; ++k)
                    bg += cs[k] * std::cos(2.0 * kPi * (fy[k] * y + fx[k] * x) / size + ph[k]);
                const double v = mask.at(y, x) ? bg * (1.0 - params.vessel_contrast) : bg;
                img.at(y, x) = static_cast<float>(v + 0.01 * rng.normal());
            }
    } else {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double rho2 = beam.rho2(y, x);
                double v;
                if (rho2 <= 1.0) {
                    const double base =
                        (0.78 - 0.30 * rho2) *
                        (1.0 + params.background_gradient * 0.3 *
                                   std::cos(2.0 * kPi * (y + 0.7 * x) / (1.9 * size)));
                    v = mask.at(y, x) ? base * (1.0 - params.vessel_contrast) : base;
                } else {
                    v = 0.05;
                }
                // Poisson-like grain: variance grows with the signal
                v += 0.03 * std::sqrt(std::max(v, 0.0)) * rng.normal();
                img.at(y, x) = static_cast<float>(v);
            }
    }

    Phantom out;
    out.image = normalize(blur3x3(img));
    out.mask = std::move(mask);
    return out;
}

double motion_displacement(const MotionModel& motion, double t) {
    motion.validate();
    if (motion.kind == MotionKind::motion_static || motion.amplitude_px == 0.0) return 0.0;
    return motion.amplitude_px * std::sin(2.0 * kPi * t / motion.period_s);
}

FrameStream gen_stream(const ImageF& phantom, const BinaryMask& mask, int n_frames, double fps,
                       const MotionModel& motion, double noise_scale, uint64_t seed) {
    if (n_frames < 1) throw ContractViolation("gen_stream: n_frames must be >= 1");
    if (fps <= 0.0) throw ContractViolation("gen_stream: fps must be positive");
    if (noise_scale < 0.0) throw ContractViolation("gen_stream: noise_scale must be >= 0");
    if (mask.height != phantom.height || mask.width != phantom.width)
        throw ContractViolation("gen_stream: phantom/mask shape mismatch");
    motion.validate();

    FrameStream s;
    s.width = phantom.width;
    s.height = phantom.height;
    s.fps = static_cast<float>(fps);
    const size_t per = static_cast<size_t>(s.width) * s.height;
    s.samples.resize(per * static_cast<size_t>(n_frames));

    // Mid-range per-frame amplitude keeps the noiseless cumulative image
    // within one 16-bit quantum of the phantom while leaving headroom so
    // shot noise almost never clips at the top.
    constexpr double kFrameAmplitude = 32768.0;

    Rng rng(seed);
    for (int f = 0; f < n_frames; ++f) {
        const double t = static_cast<double>(f) / fps;
        const int dy = static_cast<int>(std::lround(motion_displacement(motion, t)));
        const ImageF frame_img = dy == 0 ? phantom : shift_image(phantom, dy, 0);
        uint16_t* dst = s.frame(f);
        for (size_t i = 0; i < per; ++i) {
            const double clean = std::clamp(static_cast<double>(frame_img.px[i]), 0.0, 1.0);
            double counts = clean * kFrameAmplitude;
            if (noise_scale > 0.0 && counts > 0.0)
                counts += noise_scale * std::sqrt(counts) * rng.normal();
            counts = std::clamp(counts, 0.0, 65535.0);
            dst[i] = static_cast<uint16_t>(std::lround(counts));
        }
    }
    return s;
}

}  // namespace bioseg
