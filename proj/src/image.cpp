#include "bioseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bioseg {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos)
        throw FormatError("PGM: missing header token at byte " + std::to_string(start));
    return bytes.substr(start, pos - start);
}

int parse_header_int(const std::string& bytes, size_t& pos, const char* what) {
    const size_t at = pos;
    const std::string tok = next_token(bytes, pos);
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw FormatError(std::string("PGM: bad ") + what + " at byte " + std::to_string(at));
    }
}

}  // namespace

PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    const std::string magic = next_token(bytes, pos);
    if (magic == "P2") throw FormatError("PGM: ASCII (P2) files are unsupported, use binary P5");
    if (magic != "P5") throw FormatError("PGM: bad magic '" + magic + "' at byte 0");

    PgmImage img;
    img.width = parse_header_int(bytes, pos, "width");
    img.height = parse_header_int(bytes, pos, "height");
    img.maxval = parse_header_int(bytes, pos, "maxval");
    if (img.width <= 0 || img.height <= 0)
        throw FormatError("PGM: non-positive dimensions in header");
    if (img.maxval != 255 && img.maxval != 65535)
        throw FormatError("PGM: unsupported maxval " + std::to_string(img.maxval) +
                          " (expected 255 or 65535)");
    // exactly one whitespace byte separates maxval from the payload
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("PGM: missing payload separator at byte " + std::to_string(pos));
    ++pos;

    const size_t count = static_cast<size_t>(img.width) * img.height;
    const size_t bytes_per = img.maxval > 255 ? 2 : 1;
    if (bytes.size() - pos < count * bytes_per)
        throw FormatError("PGM: truncated payload at byte " + std::to_string(bytes.size()) +
                          " (need " + std::to_string(pos + count * bytes_per) + " bytes)");

    img.pixels.resize(count);
    if (bytes_per == 1) {
        for (size_t i = 0; i < count; ++i)
            img.pixels[i] = static_cast<uint8_t>(bytes[pos + i]);
    } else {
        // 16-bit samples are big-endian per the PGM convention
        for (size_t i = 0; i < count; ++i) {
            const uint16_t hi = static_cast<uint8_t>(bytes[pos + 2 * i]);
            const uint16_t lo = static_cast<uint8_t>(bytes[pos + 2 * i + 1]);
            img.pixels[i] = static_cast<uint16_t>((hi << 8) | lo);
        }
    }
    return img;
}

void write_pgm(const PgmImage& image, const std::filesystem::path& path) {
    if (image.maxval != 255 && image.maxval != 65535)
        throw ContractViolation("write_pgm: maxval must be 255 or 65535");
    if (image.pixels.size() != static_cast<size_t>(image.width) * image.height)
        throw ContractViolation("write_pgm: pixel buffer does not match dims");
    for (uint16_t v : image.pixels)
        if (v > image.maxval) throw ContractViolation("write_pgm: sample exceeds maxval");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "P5\n" << image.width << " " << image.height << "\n" << image.maxval << "\n";
    if (image.maxval > 255) {
        std::string payload(image.pixels.size() * 2, '\0');
        for (size_t i = 0; i < image.pixels.size(); ++i) {
            payload[2 * i] = static_cast<char>(image.pixels[i] >> 8);
            payload[2 * i + 1] = static_cast<char>(image.pixels[i] & 0xFF);
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    } else {
        std::string payload(image.pixels.size(), '\0');
        for (size_t i = 0; i < image.pixels.size(); ++i)
            payload[i] = static_cast<char>(image.pixels[i] & 0xFF);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

ImageF to_grayscale(const RgbImage& rgb) {
    if (rgb.rgb.size() != 3 * static_cast<size_t>(rgb.height) * rgb.width)
        throw ContractViolation("to_grayscale: expected 3-channel 8-bit input");
    ImageF out(rgb.height, rgb.width);
    for (size_t i = 0; i < out.px.size(); ++i) {
        const float r = rgb.rgb[3 * i + 0];
        const float g = rgb.rgb[3 * i + 1];
        const float b = rgb.rgb[3 * i + 2];
        out.px[i] = (0.299f * r + 0.587f * g + 0.114f * b) / 255.0f;
    }
    return out;
}

ImageF normalize(const ImageF& image) {
    if (image.px.empty()) return image;
    const auto [lo_it, hi_it] = std::minmax_element(image.px.begin(), image.px.end());
    const float lo = *lo_it, hi = *hi_it;
    ImageF out(image.height, image.width);
    if (hi <= lo) return out;  // constant image -> zeros
    const float inv = 1.0f / (hi - lo);
    for (size_t i = 0; i < image.px.size(); ++i) out.px[i] = (image.px[i] - lo) * inv;
    return out;
}

ImageF pgm_to_float(const PgmImage& image) {
    ImageF out(image.height, image.width);
    const float inv = 1.0f / static_cast<float>(image.maxval);
    for (size_t i = 0; i < out.px.size(); ++i) out.px[i] = image.pixels[i] * inv;
    return out;
}

PgmImage float_to_pgm16(const ImageF& image) {
    PgmImage out;
    out.width = image.width;
    out.height = image.height;
    out.maxval = 65535;
    out.pixels.resize(image.px.size());
    for (size_t i = 0; i < image.px.size(); ++i) {
        const float v = std::clamp(image.px[i], 0.0f, 1.0f);
        out.pixels[i] = static_cast<uint16_t>(std::lround(v * 65535.0f));
    }
    return out;
}

PgmImage mask_to_pgm(const BinaryMask& mask) {
    PgmImage out;
    out.width = mask.width;
    out.height = mask.height;
    out.maxval = 255;
    out.pixels.resize(mask.values.size());
    for (size_t i = 0; i < mask.values.size(); ++i) out.pixels[i] = mask.values[i] ? 255 : 0;
    return out;
}

BinaryMask pgm_to_mask(const PgmImage& image) {
    BinaryMask out(image.height, image.width);
    for (size_t i = 0; i < image.pixels.size(); ++i) out.values[i] = image.pixels[i] ? 1 : 0;
    return out;
}

ImageF rot90_image(const ImageF& im) {
    ImageF out(im.width, im.height);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out.at(im.width - 1 - x, y) = im.at(y, x);
    return out;
}

ImageF rot180_image(const ImageF& im) {
    ImageF out(im.height, im.width);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out.at(im.height - 1 - y, im.width - 1 - x) = im.at(y, x);
    return out;
}

ImageF rot270_image(const ImageF& im) {
    ImageF out(im.width, im.height);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out.at(x, im.height - 1 - y) = im.at(y, x);
    return out;
}

ImageF hflip_image(const ImageF& im) {
    ImageF out(im.height, im.width);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out.at(y, im.width - 1 - x) = im.at(y, x);
    return out;
}

ImageF add_gaussian_noise(const ImageF& im, double sigma, Rng& rng) {
    ImageF out = im;
    for (auto& v : out.px)
        v = std::clamp(v + static_cast<float>(rng.normal() * sigma), 0.0f, 1.0f);
    return out;
}

ImageF shift_image(const ImageF& im, int dy, int dx) {
    ImageF out(im.height, im.width);
    for (int y = 0; y < im.height; ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= im.height) continue;
        for (int x = 0; x < im.width; ++x) {
            const int sx = x - dx;
            if (sx < 0 || sx >= im.width) continue;
            out.at(y, x) = im.at(sy, sx);
        }
    }
    return out;
}

}  // namespace bioseg
