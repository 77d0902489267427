#include "bioseg/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>

namespace bioseg {

namespace {

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& bytes, size_t& pos, const char* what) {
    if (pos + 4 > bytes.size())
        throw FormatError(std::string("CVS1: truncated ") + what + " at byte " +
                          std::to_string(pos));
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

FrameStream read_stream(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    if (bytes.size() < 4 || bytes.substr(0, 4) != "CVS1")
        throw FormatError("CVS1: bad magic at byte 0");
    pos = 4;

    FrameStream s;
    s.width = static_cast<int>(get_u32(bytes, pos, "width"));
    s.height = static_cast<int>(get_u32(bytes, pos, "height"));
    const uint32_t n_frames = get_u32(bytes, pos, "frame count");
    const uint32_t fps_bits = get_u32(bytes, pos, "fps");
    std::memcpy(&s.fps, &fps_bits, sizeof s.fps);
    if (s.fps <= 0.0f) throw FormatError("CVS1: fps must be positive");

    if (pos + 4 > bytes.size())
        throw FormatError("CVS1: truncated header at byte " + std::to_string(pos));
    const uint8_t depth = static_cast<uint8_t>(bytes[pos]);
    if (depth != 16) throw FormatError("CVS1: unsupported bit depth " + std::to_string(depth));
    for (int i = 1; i < 4; ++i)
        if (bytes[pos + i] != 0)
            throw FormatError("CVS1: reserved bytes must be zero at byte " +
                              std::to_string(pos + i));
    pos += 4;

    if (s.width <= 0 || s.height <= 0) throw FormatError("CVS1: non-positive dimensions");
    const size_t count = static_cast<size_t>(n_frames) * s.width * s.height;
    if (bytes.size() - pos < count * 2)
        throw FormatError("CVS1: declared " + std::to_string(n_frames) +
                          " frames but payload ends at byte " + std::to_string(bytes.size()));
    if (bytes.size() - pos > count * 2)
        throw FormatError("CVS1: trailing bytes after frame payload");

    s.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
        const uint16_t lo = static_cast<uint8_t>(bytes[pos + 2 * i]);
        const uint16_t hi = static_cast<uint8_t>(bytes[pos + 2 * i + 1]);
        s.samples[i] = static_cast<uint16_t>(lo | (hi << 8));
    }
    return s;
}

void write_stream(const FrameStream& stream, const std::filesystem::path& path) {
    if (stream.width <= 0 || stream.height <= 0)
        throw ContractViolation("write_stream: non-positive dimensions");
    if (stream.fps <= 0.0f) throw ContractViolation("write_stream: fps must be positive");
    if (stream.samples.size() % (static_cast<size_t>(stream.width) * stream.height) != 0)
        throw ContractViolation("write_stream: sample buffer is not a whole number of frames");

    std::string buf = "CVS1";
    put_u32(buf, static_cast<uint32_t>(stream.width));
    put_u32(buf, static_cast<uint32_t>(stream.height));
    put_u32(buf, static_cast<uint32_t>(stream.n_frames()));
    uint32_t fps_bits;
    std::memcpy(&fps_bits, &stream.fps, sizeof fps_bits);
    put_u32(buf, fps_bits);
    buf.push_back(static_cast<char>(16));
    buf.append(3, '\0');
    for (uint16_t v : stream.samples) {
        buf.push_back(static_cast<char>(v & 0xFF));
        buf.push_back(static_cast<char>((v >> 8) & 0xFF));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::vector<int64_t> accumulate_raw(const FrameStream& stream, int start, int count) {
    if (count < 1) throw ContractViolation("accumulate: empty frame range");
    if (start < 0 || start + count > stream.n_frames())
        throw ContractViolation("accumulate: frame range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside stream of " +
                                std::to_string(stream.n_frames()) + " frames");
    const size_t per = static_cast<size_t>(stream.width) * stream.height;
    std::vector<int64_t> sum(per, 0);
    for (int f = start; f < start + count; ++f) {
        const uint16_t* p = stream.frame(f);
        for (size_t i = 0; i < per; ++i) sum[i] += p[i];
    }
    return sum;
}

ImageF accumulate(const FrameStream& stream, int start, int count) {
    const std::vector<int64_t> sum = accumulate_raw(stream, start, count);
    const auto [lo_it, hi_it] = std::minmax_element(sum.begin(), sum.end());
    const int64_t lo = *lo_it, hi = *hi_it;
    ImageF out(stream.height, stream.width);
    if (hi > lo) {
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (size_t i = 0; i < sum.size(); ++i)
            out.px[i] = static_cast<float>(static_cast<double>(sum[i] - lo) * inv);
    }
    return out;
}

std::vector<Window> subcumulative_windows(const FrameStream& stream, const GateSpec& spec) {
    const int n = stream.n_frames();
    if (spec.gate_frames < 1 || spec.gate_frames > n)
        throw ContractViolation("subcumulative_windows: gate must lie in [1, n_frames]");
    const int stride = spec.stride_frames > 0 ? spec.stride_frames : spec.gate_frames;
    if (stride < 1) throw ContractViolation("subcumulative_windows: stride must be >= 1");

    std::vector<Window> out;
    for (int start = 0; start + spec.gate_frames <= n; start += stride) {
        Window w;
        w.start = start;
        w.duration_s = gate_duration_seconds(spec.gate_frames, stream.fps);
        w.image = accumulate(stream, start, spec.gate_frames);
        out.push_back(std::move(w));
    }
    return out;
}

double gate_duration_seconds(int gate_frames, double fps) {
    if (fps <= 0.0) throw ContractViolation("gate_duration_seconds: fps must be positive");
    return static_cast<double>(gate_frames) / fps;
}

ImageF roi_crop_multiple(const ImageF& image, std::pair<int, int> anchor,
                         std::pair<int, int> n_patches, int patch) {
    const auto [nr, nc] = n_patches;
    const auto [row, col] = anchor;
    if (nr < 1 || nr > 4 || nc < 1 || nc > 4)
        throw ContractViolation("roi_crop_multiple: patch counts must lie in [1,4]");
    if (patch < 1) throw ContractViolation("roi_crop_multiple: patch must be >= 1");
    const int h = nr * patch, w = nc * patch;
    if (row < 0 || col < 0 || row + h > image.height || col + w > image.width)
        throw ContractViolation("roi_crop_multiple: crop " + std::to_string(h) + "x" +
                                std::to_string(w) + " at (" + std::to_string(row) + "," +
                                std::to_string(col) + ") exceeds image " +
                                std::to_string(image.height) + "x" + std::to_string(image.width));

    ImageF out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = image.at(row + y, col + x);
    return out;
}

ImageF tiled_infer_probs(SegResNet& model, const ImageF& image) {
    const int patch = model.config().patch_size;
    if (image.height % patch != 0 || image.width % patch != 0)
        throw ContractViolation("tiled_infer: image dims must be exact multiples of patch size "
                                "(use roi_crop_multiple first)");
    const int ty = image.height / patch;
    const int tx = image.width / patch;

    ImageF probs(image.height, image.width);
    Tensor tile(1, 1, patch, patch);
    for (int gy = 0; gy < ty; ++gy)
        for (int gx = 0; gx < tx; ++gx) {
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    tile.data[static_cast<size_t>(y) * patch + x] =
                        image.at(gy * patch + y, gx * patch + x);
            const Tensor out = model.forward(tile, nn::Mode::infer);
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    probs.at(gy * patch + y, gx * patch + x) =
                        out.data[static_cast<size_t>(y) * patch + x];
        }
    return probs;
}

BinaryMask tiled_infer(SegResNet& model, const ImageF& image, float theta) {
    const ImageF probs = tiled_infer_probs(model, image);
    return binarize(probs.px, probs.height, probs.width, theta);
}

LatencyStats measure_latency(SegResNet& model, int n_warmup, int n_trials) {
    if (n_trials < 10) throw ContractViolation("measure_latency: n_trials must be >= 10");
    const int patch = model.config().patch_size;
    Tensor input(1, model.config().in_channels, patch, patch);
    for (size_t i = 0; i < input.data.size(); ++i)
        input.data[i] = static_cast<float>(i % 251) / 251.0f;

    for (int i = 0; i < n_warmup; ++i) (void)model.forward(input, nn::Mode::infer);

    LatencyStats stats;
    stats.samples_s.reserve(static_cast<size_t>(n_trials));
    volatile float sink = 0.0f;
    for (int i = 0; i < n_trials; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor out = model.forward(input, nn::Mode::infer);
        const auto t1 = std::chrono::steady_clock::now();
        sink = sink + out.data[0];
        stats.samples_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    (void)sink;

    std::vector<double> sorted = stats.samples_s;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double s : sorted) total += s;
    stats.mean_s = total / static_cast<double>(sorted.size());
    stats.p50_s = sorted[sorted.size() / 2];
    stats.p99_s = sorted[std::min(sorted.size() - 1,
                                  static_cast<size_t>(0.99 * static_cast<double>(sorted.size())))];
    return stats;
}

void write_latency_csv(const LatencyStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    char line[160];
    out << "# experiment=latency\n";
    out << "# gpu_reference_ms=0.7 (published GPU timing, for reference only; not a CPU target)\n";
    std::snprintf(line, sizeof line, "# mean_s=%.9f\n# p50_s=%.9f\n# p99_s=%.9f\n", stats.mean_s,
                  stats.p50_s, stats.p99_s);
    out << line;
    out << "trial,seconds\n";
    for (size_t i = 0; i < stats.samples_s.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.9f\n", i, stats.samples_s[i]);
        out << line;
    }
}

}  // namespace bioseg
