#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bioseg/mask.hpp"
#include "bioseg/rng.hpp"

namespace bioseg {

// Grayscale working image, float values (nominally in [0,1]).
struct ImageF {
    int height = 0;
    int width = 0;
    std::vector<float> px;

    ImageF() = default;
    ImageF(int h, int w) : height(h), width(w), px(static_cast<size_t>(h) * w, 0.0f) {
        if (h < 0 || w < 0) throw ContractViolation("image dims must be non-negative");
    }

    float& at(int y, int x) { return px[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return px.size(); }
    bool same_shape(const ImageF& o) const { return height == o.height && width == o.width; }
};

// Integer image as stored in a PGM file; samples up to 16 bit.
struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<uint16_t> pixels;
};

// Interleaved 8-bit RGB.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb;  // 3 * h * w
};

// Binary PGM (P5) only; maxval 255 or 65535, 16-bit samples big-endian.
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const PgmImage& image, const std::filesystem::path& path);

// 0.299 R + 0.587 G + 0.114 B, rescaled to [0,1].
ImageF to_grayscale(const RgbImage& rgb);

// Min-max rescale to [0,1]; a constant image maps to all zeros.
ImageF normalize(const ImageF& image);

ImageF pgm_to_float(const PgmImage& image);                  // divide by maxval
PgmImage float_to_pgm16(const ImageF& image);                // scale by 65535, round
PgmImage mask_to_pgm(const BinaryMask& mask);                // 0 / 255
BinaryMask pgm_to_mask(const PgmImage& image);               // nonzero -> 1

ImageF rot90_image(const ImageF& im);   // 90 deg counterclockwise
ImageF rot180_image(const ImageF& im);
ImageF rot270_image(const ImageF& im);
ImageF hflip_image(const ImageF& im);

// i.i.d. Gaussian pixel noise, clipped to [0,1].
ImageF add_gaussian_noise(const ImageF& im, double sigma, Rng& rng);

// Rigid integer-pixel shift; vacated pixels are zero-filled.
ImageF shift_image(const ImageF& im, int dy, int dx);

}  // namespace bioseg
