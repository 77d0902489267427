#include "bioseg/experiments.hpp"

#include <chrono>

namespace bioseg {

RobustnessResult run_robustness(Segmenter& segmenter, const std::vector<ImageF>& test_images,
                                const RobustnessOptions& options) {
    RobustnessResult result;
    result.report.experiment_id = "robustness";
    result.report.seed = options.seed;
    result.report.echo("noise_sigma", fmt_f(options.noise_sigma, 4));
    result.report.echo("largest_component", options.use_largest_component ? "true" : "false");
    result.report.echo("n_images", std::to_string(test_images.size()));
    result.report.columns = {"case", "transform", "dice"};

    auto post = [&options](BinaryMask m) {
        return options.use_largest_component ? largest_component(m) : m;
    };

    Rng noise_rng(Rng::derive(options.seed, 7001));

    std::vector<double> rot90_dice, rot180_dice, noise_dice;
    for (size_t i = 0; i < test_images.size(); ++i) {
        const ImageF& image = test_images[i];
        const BinaryMask reference = post(segmenter.segment(image));

        // rot90: predict on the rotated input, rotate the prediction back
        {
            const BinaryMask pred = segmenter.segment(rot90_image(image));
            const double d = dice_score(post(rot270_mask(pred)), reference);
            rot90_dice.push_back(d);
            result.report.rows.push_back({std::to_string(i), "rot90", fmt_f(d)});
        }
        {
            const BinaryMask pred = segmenter.segment(rot180_image(image));
            const double d = dice_score(post(rot180_mask(pred)), reference);
            rot180_dice.push_back(d);
            result.report.rows.push_back({std::to_string(i), "rot180", fmt_f(d)});
        }
        {
            const ImageF noisy = add_gaussian_noise(image, options.noise_sigma, noise_rng);
            const BinaryMask pred = segmenter.segment(noisy);
            const double d = dice_score(post(pred), reference);
            noise_dice.push_back(d);
            result.report.rows.push_back({std::to_string(i), "noise", fmt_f(d)});
        }
    }

    auto add_summary = [&result](const std::string& name, const std::vector<double>& v) {
        const SummaryStats s = summarize(v);
        result.summaries.push_back(RobustnessSummary{name, s});
        result.report.rows.push_back({"summary_mean", name, fmt_f(s.mean)});
        result.report.rows.push_back({"summary_std", name, fmt_f(s.stddev)});
        result.report.rows.push_back({"summary_stderr", name, fmt_f(s.stderr_mean)});
    };
    add_summary("rot90", rot90_dice);
    add_summary("rot180", rot180_dice);
    add_summary("noise", noise_dice);
    return result;
}

ConsistencyResult run_consistency(const std::function<std::unique_ptr<Segmenter>()>& make_segmenter,
                                  const ImageF& image, int n_repeats, int boundary_d,
                                  uint64_t seed) {
    if (n_repeats < 1) throw ContractViolation("run_consistency: n_repeats must be >= 1");

    ConsistencyResult result;
    result.report.experiment_id = "consistency";
    result.report.seed = seed;
    result.report.echo("n_repeats", std::to_string(n_repeats));
    result.report.echo("boundary_d", std::to_string(boundary_d));
    result.report.echo("manual_reference_seconds", "120-180 (published manual timing, for comparison)");
    result.report.columns = {"row_kind", "a", "b", "dice", "boundary_iou", "seconds"};

    std::vector<BinaryMask> masks;
    for (int r = 0; r < n_repeats; ++r) {
        // fresh pipeline per repeat, including segmenter construction
        const auto t0 = std::chrono::steady_clock::now();
        std::unique_ptr<Segmenter> segmenter = make_segmenter();
        BinaryMask mask = segmenter->segment(image);
        const auto t1 = std::chrono::steady_clock::now();
        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        result.run_seconds.push_back(seconds);
        result.report.rows.push_back(
            {"run", std::to_string(r), "", "", "", fmt_f(seconds, 9)});
        masks.push_back(std::move(mask));
    }

    for (int a = 0; a < n_repeats; ++a)
        for (int b = a + 1; b < n_repeats; ++b) {
            const double d = dice_score(masks[static_cast<size_t>(a)],
                                        masks[static_cast<size_t>(b)]);
            const double bi = boundary_iou(masks[static_cast<size_t>(a)],
                                           masks[static_cast<size_t>(b)], boundary_d);
            result.pairwise_dice.push_back(d);
            result.pairwise_boundary_iou.push_back(bi);
            result.report.rows.push_back({"pair", std::to_string(a), std::to_string(b), fmt_f(d),
                                          fmt_f(bi), ""});
        }

    const SummaryStats sd = summarize(result.pairwise_dice);
    const SummaryStats sb = summarize(result.pairwise_boundary_iou);
    const SummaryStats st = summarize(result.run_seconds);
    result.report.rows.push_back({"summary_mean", "", "", fmt_f(sd.mean), fmt_f(sb.mean),
                                  fmt_f(st.mean, 9)});
    result.report.rows.push_back({"summary_std", "", "", fmt_f(sd.stddev), fmt_f(sb.stddev),
                                  fmt_f(st.stddev, 9)});
    return result;
}

SubcumulativeResult run_subcumulative(Segmenter& segmenter, const FrameStream& stream,
                                      const std::vector<int>& gates, int stride, uint64_t seed) {
    if (gates.empty()) throw ContractViolation("run_subcumulative: no gates given");
    for (int g : gates)
        if (g < 1 || g > stream.n_frames())
            throw ContractViolation("run_subcumulative: gate " + std::to_string(g) +
                                    " outside [1, n_frames]");

    SubcumulativeResult result;
    result.report.experiment_id = "subcumulative";
    result.report.seed = seed;
    result.report.echo("n_frames", std::to_string(stream.n_frames()));
    result.report.echo("fps", fmt_f(stream.fps, 3));
    result.report.echo("stride", stride > 0 ? std::to_string(stride) : "gate");
    result.report.columns = {"row_kind", "gate_frames", "duration_s", "window_start", "dice",
                             "stderr"};

    const ImageF cumulative = accumulate(stream, 0, stream.n_frames());
    const BinaryMask reference = segmenter.segment(cumulative);

    for (int gate : gates) {
        const std::vector<Window> windows =
            subcumulative_windows(stream, GateSpec{gate, stride});
        std::vector<double> dices;
        for (const Window& w : windows) {
            const double d = dice_score(segmenter.segment(w.image), reference);
            dices.push_back(d);
            result.report.rows.push_back({"window", std::to_string(gate),
                                          fmt_f(w.duration_s, 2), std::to_string(w.start),
                                          fmt_f(d), ""});
        }
        const SummaryStats s = summarize(dices);
        const double duration = gate_duration_seconds(gate, stream.fps);
        result.gates.push_back(SubcumulativeGate{gate, duration, s});
        result.report.rows.push_back({"gate_mean", std::to_string(gate), fmt_f(duration, 2), "",
                                      fmt_f(s.mean), fmt_f(s.stderr_mean)});
    }
    return result;
}

std::vector<int> default_gates() {
    std::vector<int> gates;
    for (int g = 10; g <= 120; g += 10) gates.push_back(g);
    return gates;
}

}  // namespace bioseg
