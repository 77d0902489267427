// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Artifacts (reports, weights) land in ./acceptance_out.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bioseg/experiments.hpp"
#include "bioseg/gradcheck.hpp"
#include "bioseg/loss.hpp"
#include "bioseg/model.hpp"
#include "bioseg/patches.hpp"
#include "bioseg/phantom.hpp"
#include "bioseg/stream.hpp"
#include "bioseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace bioseg;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool passed, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", passed ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!passed) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.init_filters = 8;
    cfg.blocks_down = {1, 2};
    cfg.blocks_up = {1};
    cfg.patch_size = 32;
    return cfg;
}

PhantomParams phantom_params(PhantomStyle style, int size, uint64_t seed) {
    PhantomParams p;
    p.size = size;
    p.style = style;
    p.seed = seed;
    p.n_trees = 3;
    p.radius_min = 1.8;
    p.radius_max = 3.6;
    p.branch_prob = 0.06;
    return p;
}

std::vector<PatchRecord> make_patches(PhantomStyle style, int phantom_size, int grid, int count,
                                      uint64_t seed_base) {
    std::vector<PatchRecord> out;
    uint64_t seed = seed_base;
    while (static_cast<int>(out.size()) < count) {
        const Phantom ph = gen_phantom(phantom_params(style, phantom_size, seed));
        std::vector<PatchRecord> recs = extract_patch_grid(
            ph.image, ph.mask, grid, 32, true, "ph" + std::to_string(seed),
            style == PhantomStyle::source ? Domain::source : Domain::target);
        recs = filter_by_label_area(recs, 0.05);
        for (PatchRecord& r : recs) {
            out.push_back(std::move(r));
            if (static_cast<int>(out.size()) == count) break;
        }
        ++seed;
    }
    return out;
}

// ---------------------------------------------------------------------------

void criterion_1_gradients() {
    const auto t0 = Clock::now();
    bool all_ok = true;
    double worst_op = 0.0, model_err = 0.0;
    for (uint64_t seed : {101u, 202u, 303u, 404u, 505u}) {
        for (const GradCheckCase& c : run_op_gradchecks(seed, 1)) {
            all_ok = all_ok && c.passed;
            if (!c.expect_failure) worst_op = std::max(worst_op, c.max_rel_err);
        }
        const GradCheckCase loss_case = run_loss_gradcheck(seed);
        all_ok = all_ok && loss_case.passed;
        const GradCheckCase model_case = run_model_gradcheck(seed);
        all_ok = all_ok && model_case.passed;
        model_err = std::max(model_err, model_case.max_rel_err);
    }
    const double dt = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "worst op err %.2e < 1e-3, end-to-end err %.2e < 3e-3, 5 seeds, %.1f s < 60 s",
                  worst_op, model_err, dt);
    report(1, "gradient correctness", all_ok && dt < 60.0, detail);
}

void criterion_2_loss_identities() {
    bool ok = true;

    // perfect-overlap Dice loss
    Tensor pred(1, 1, 8, 8), target(1, 1, 8, 8);
    Rng rng(2001);
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const float v = rng.uniform() < 0.4 ? 1.0f : 0.0f;
        pred.data[i] = v;
        target.data[i] = v;
    }
    ok = ok && dice_loss(pred, target).value <= 1e-4;

    // bce at p = 0.5
    Tensor half(1, 1, 8, 8), t2(1, 1, 8, 8);
    for (size_t i = 0; i < half.data.size(); ++i) {
        half.data[i] = 0.5f;
        t2.data[i] = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    }
    ok = ok && std::abs(bce_loss(half, t2).value - std::log(2.0)) <= 1e-6;

    // combined = 1*dice + 0.1*bce recomposition
    Tensor p3(2, 1, 6, 6), t3(2, 1, 6, 6);
    for (auto& v : p3.data) v = static_cast<float>(rng.uniform(0.02, 0.98));
    for (auto& v : t3.data) v = rng.uniform() < 0.35 ? 1.0f : 0.0f;
    LossWeights w;
    const double recomposed =
        w.lambda1 * dice_loss(p3, t3, w.dice_smooth).value + w.lambda2 * bce_loss(p3, t3).value;
    ok = ok && std::abs(combined_loss(p3, t3, w).value - recomposed) < 1e-12;

    // dice = 2 iou / (1 + iou) over 100 random pairs
    double worst_identity = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = rng.uniform_int(2, 12), wdt = rng.uniform_int(2, 12);
        BinaryMask a(h, wdt), b(h, wdt);
        for (auto& v : a.values) v = rng.uniform() < 0.5 ? 1 : 0;
        for (auto& v : b.values) v = rng.uniform() < 0.5 ? 1 : 0;
        const double d = dice_score(a, b), i = iou_score(a, b);
        worst_identity = std::max(worst_identity, std::abs(d - 2.0 * i / (1.0 + i)));
    }
    ok = ok && worst_identity < 1e-12;

    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "dice(perfect)=0, bce(0.5)=ln2, recomposition exact, identity dev %.1e < 1e-12",
                  worst_identity);
    report(2, "loss/metric identities", ok, detail);
}

struct TransferArtifacts {
    fs::path best_weights;
    double finetuned_dice = 0.0;
    double scratch_dice = 0.0;
};

TransferArtifacts criterion_3_transfer(const fs::path& out_dir) {
    const auto t0 = Clock::now();
    const ModelConfig mc = tiny_config();

    // >= 512 source-style patches for pretraining
    const std::vector<PatchRecord> source = make_patches(PhantomStyle::source, 192, 6, 576, 1000);
    auto [src_train, src_val] = split_train_val(source, 0.1, 11);

    // 64 target-style patches for fine-tuning, 64 held out for testing
    const std::vector<PatchRecord> target_pool =
        make_patches(PhantomStyle::target, 128, 4, 128, 5000);
    const std::vector<PatchRecord> target_ft(target_pool.begin(), target_pool.begin() + 64);
    const std::vector<PatchRecord> target_test(target_pool.begin() + 64, target_pool.end());
    auto [ft_train, ft_val] = split_train_val(target_ft, 0.1, 12);

    TrainConfig pre_cfg;
    pre_cfg.model = mc;
    pre_cfg.epochs = 30;
    pre_cfg.lr = 3e-4;
    pre_cfg.batch_size = 24;
    pre_cfg.l2_decay = 1e-8;
    pre_cfg.seed = 13;

    SegResNet pretrained_model(mc, pre_cfg.seed);
    (void)train_to_dir(pretrained_model, src_train, src_val, pre_cfg, out_dir / "pretrain");

    TrainConfig ft_cfg = pre_cfg;
    ft_cfg.epochs = 40;
    ft_cfg.seed = 14;
    const TrainResult ft = finetune(out_dir / "pretrain" / "best.srw1", ft_train, ft_val, ft_cfg,
                                    out_dir / "finetune");

    // from-scratch arm under the identical budget and seed
    SegResNet scratch_model(mc, ft_cfg.seed);
    const TrainResult scratch =
        train_to_dir(scratch_model, ft_train, ft_val, ft_cfg, out_dir / "scratch");

    SegResNet ft_best(mc, 0);
    restore(ft_best, ft.best.weights);
    SegResNet scratch_best(mc, 0);
    restore(scratch_best, scratch.best.weights);

    const MetricsReport ft_eval = evaluate_dataset(ft_best, target_test);
    const MetricsReport scratch_eval = evaluate_dataset(scratch_best, target_test);
    write_metrics_csv(ft_eval, out_dir / "finetune_test_eval.csv", ft_cfg.seed);
    write_metrics_csv(scratch_eval, out_dir / "scratch_test_eval.csv", ft_cfg.seed);

    const double dt = seconds_since(t0);
    const bool ok =
        ft_eval.dice.mean >= 0.75 && ft_eval.dice.mean >= scratch_eval.dice.mean && dt < 900.0;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "held-out target dice %.4f >= 0.75, finetuned %.4f >= scratch %.4f, %.0f s < 900 s",
                  ft_eval.dice.mean, ft_eval.dice.mean, scratch_eval.dice.mean, dt);
    report(3, "desk-scale transfer", ok, detail);

    TransferArtifacts art;
    art.best_weights = out_dir / "finetune" / "best.srw1";
    art.finetuned_dice = ft_eval.dice.mean;
    art.scratch_dice = scratch_eval.dice.mean;
    return art;
}

void criterion_4_robustness(const fs::path& weights, const fs::path& out_dir) {
    ModelSegmenter segmenter(load_weights<float>(weights));

    std::vector<ImageF> images;
    for (uint64_t seed = 9000; images.size() < 20; ++seed) {
        const Phantom ph = gen_phantom(phantom_params(PhantomStyle::target, 64, seed));
        if (ph.mask.count() < 40) continue;  // need visible vessels
        images.push_back(ph.image);
    }

    RobustnessOptions options;
    options.noise_sigma = 0.10;
    options.seed = 15;
    const RobustnessResult result = run_robustness(segmenter, images, options);
    result.report.write_csv(out_dir / "robustness.csv");

    bool ok = result.summaries.size() == 3;
    std::string detail = "n=20;";
    for (const RobustnessSummary& s : result.summaries) {
        ok = ok && s.dice.mean >= 0.70;
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s %.4f+-%.4f", s.transform.c_str(), s.dice.mean,
                      s.dice.stddev);
        detail += buf;
    }
    detail += " all >= 0.70";
    report(4, "robustness analog", ok, detail);
}

void criterion_5_subcumulative(const fs::path& weights, const fs::path& out_dir) {
    ModelSegmenter segmenter(load_weights<float>(weights));
    const Phantom ph = gen_phantom(phantom_params(PhantomStyle::target, 64, 7777));

    const double noise = 55.0;

    // static 120-frame stream: exact full-gate window + monotone trend
    const FrameStream static120 =
        gen_stream(ph.image, ph.mask, 120, 19.6, MotionModel{}, noise, 611);
    const SubcumulativeResult r120 =
        run_subcumulative(segmenter, static120, default_gates(), 0, 611);
    r120.report.write_csv(out_dir / "subcum_static120.csv");

    std::vector<double> gates_x, dice_y;
    double dice_at_120 = -1.0;
    std::string dur10, dur120;
    for (const SubcumulativeGate& g : r120.gates) {
        gates_x.push_back(g.gate_frames);
        dice_y.push_back(g.dice.mean);
        if (g.gate_frames == 120) dice_at_120 = g.dice.mean;
        if (g.gate_frames == 10) dur10 = fmt_f(g.duration_s, 2);
        if (g.gate_frames == 120) dur120 = fmt_f(g.duration_s, 2);
    }
    const double rho = spearman_correlation(gates_x, dice_y);

    // matched-seed motion/static pair, 240 frames so gate-120 windows differ
    // from each stream's own full-cumulative reference
    MotionModel breathing{3.0, 4.0, MotionKind::sinusoidal};
    const FrameStream motion240 =
        gen_stream(ph.image, ph.mask, 240, 19.6, breathing, noise, 612);
    const FrameStream static240 =
        gen_stream(ph.image, ph.mask, 240, 19.6, MotionModel{}, noise, 612);
    const SubcumulativeResult rm = run_subcumulative(segmenter, motion240, {120}, 0, 612);
    const SubcumulativeResult rs = run_subcumulative(segmenter, static240, {120}, 0, 612);
    rm.report.write_csv(out_dir / "subcum_motion240.csv");
    rs.report.write_csv(out_dir / "subcum_static240.csv");
    const double motion_dice = rm.gates[0].dice.mean;
    const double static_dice = rs.gates[0].dice.mean;

    const bool ok = dice_at_120 == 1.0 && rho >= 0.8 && motion_dice < static_dice &&
                    motion_dice < 1.0 && dur10 == "0.51" && dur120 == "6.12";
    char detail[220];
    std::snprintf(detail, sizeof detail,
                  "gate120 dice %.4f == 1, spearman %.3f >= 0.8, motion %.4f < static %.4f, "
                  "durations %s s / %s s",
                  dice_at_120, rho, motion_dice, static_dice, dur10.c_str(), dur120.c_str());
    report(5, "sub-cumulative behavior", ok, detail);
}

void criterion_6_determinism(const fs::path& weights, const fs::path& out_dir) {
    // two identical end-to-end pipeline runs: phantoms -> patches -> train ->
    // infer, compared byte for byte
    auto pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        ModelConfig mc;
        mc.init_filters = 4;
        mc.blocks_down = {1, 1};
        mc.blocks_up = {1};
        mc.patch_size = 32;

        const std::vector<PatchRecord> patches = make_patches(PhantomStyle::target, 128, 4, 32, 600);
        auto [train_set, val_set] = split_train_val(patches, 0.125, 21);
        TrainConfig cfg;
        cfg.model = mc;
        cfg.epochs = 3;
        cfg.lr = 3e-4;
        cfg.batch_size = 8;
        cfg.seed = 22;
        SegResNet model(mc, cfg.seed);
        (void)train_to_dir(model, train_set, val_set, cfg, dir);

        SegResNet best = load_weights<float>(dir / "best.srw1");
        const Phantom ph = gen_phantom(phantom_params(PhantomStyle::target, 64, 23));
        write_pgm(mask_to_pgm(tiled_infer(best, ph.image)), dir / "mask.pgm");
    };
    pipeline(out_dir / "determinism_a");
    pipeline(out_dir / "determinism_b");

    const bool checkpoints_equal = slurp(out_dir / "determinism_a" / "best.srw1") ==
                                   slurp(out_dir / "determinism_b" / "best.srw1");
    const bool masks_equal =
        slurp(out_dir / "determinism_a" / "mask.pgm") == slurp(out_dir / "determinism_b" / "mask.pgm");

    // repeat-consistency with fresh weight loads
    const Phantom ph = gen_phantom(phantom_params(PhantomStyle::target, 64, 24));
    auto factory = [&weights]() -> std::unique_ptr<Segmenter> {
        return std::make_unique<ModelSegmenter>(load_weights<float>(weights));
    };
    const ConsistencyResult consistency = run_consistency(factory, ph.image, 3, 2, 25);
    consistency.report.write_csv(out_dir / "consistency.csv");
    bool pairwise_ok = true;
    for (double d : consistency.pairwise_dice) pairwise_ok = pairwise_ok && d == 1.0;
    for (double b : consistency.pairwise_boundary_iou) pairwise_ok = pairwise_ok && b == 1.0;

    const bool ok = checkpoints_equal && masks_equal && pairwise_ok;
    char detail[180];
    std::snprintf(detail, sizeof detail,
                  "checkpoints byte-identical=%s, masks byte-identical=%s, pairwise dice/bIoU all 1.0=%s",
                  checkpoints_equal ? "yes" : "no", masks_equal ? "yes" : "no",
                  pairwise_ok ? "yes" : "no");
    report(6, "determinism & consistency", ok, detail);
}

void criterion_7_throughput(const fs::path& weights, const fs::path& out_dir) {
    SegResNet model = load_weights<float>(weights);
    const LatencyStats stats = measure_latency(model, 10, 100);
    write_latency_csv(stats, out_dir / "latency.csv");

    const double patches_per_s = 1.0 / stats.mean_s;
    const std::string csv = slurp(out_dir / "latency.csv");
    const bool labeled = csv.find("gpu_reference_ms=0.7") != std::string::npos;
    const bool ok = patches_per_s >= 19.6 && labeled && stats.p50_s > 0.0 && stats.p99_s > 0.0;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%.1f patches/s >= 19.6, mean %.3f ms p50 %.3f ms p99 %.3f ms, GPU figure labeled",
                  patches_per_s, stats.mean_s * 1e3, stats.p50_s * 1e3, stats.p99_s * 1e3);
    report(7, "throughput reporting", ok, detail);
}

void criterion_8_formats(const fs::path& out_dir) {
    bool ok = true;
    std::string detail;

    // SRW1 byte-identical roundtrip
    {
        SegResNet model(tiny_config(), 81);
        (void)model.forward(Tensor(2, 1, 32, 32), nn::Mode::train);
        const fs::path f1 = out_dir / "fmt1.srw1", f2 = out_dir / "fmt2.srw1";
        save_weights(model, f1);
        SegResNet loaded = load_weights<float>(f1);
        save_weights(loaded, f2);
        ok = ok && slurp(f1) == slurp(f2);
        detail += "srw1 roundtrip ok;";
    }

    // PGM 8/16-bit lossless
    {
        Rng rng(82);
        for (int maxval : {255, 65535}) {
            PgmImage img;
            img.width = 11;
            img.height = 6;
            img.maxval = maxval;
            img.pixels.resize(66);
            for (auto& v : img.pixels) v = static_cast<uint16_t>(rng.uniform_int(0, maxval));
            const fs::path f = out_dir / ("fmt_" + std::to_string(maxval) + ".pgm");
            write_pgm(img, f);
            ok = ok && read_pgm(f).pixels == img.pixels;
        }
        detail += " pgm 8/16 lossless;";
    }

    // CVS1 lossless
    {
        const Phantom ph = gen_phantom(phantom_params(PhantomStyle::source, 64, 83));
        const FrameStream s = gen_stream(ph.image, ph.mask, 4, 19.6, MotionModel{}, 12.0, 84);
        const fs::path f = out_dir / "fmt.cvs1";
        write_stream(s, f);
        const FrameStream back = read_stream(f);
        ok = ok && back.samples == s.samples && back.fps == s.fps;
        detail += " cvs1 lossless;";
    }

    // corrupted magic rejected with the documented category
    {
        int rejected = 0;
        for (const char* name : {"fmt1.srw1", "fmt_255.pgm", "fmt.cvs1"}) {
            std::string bytes = slurp(out_dir / name);
            bytes[0] = '!';
            const fs::path bad = out_dir / (std::string("bad_") + name);
            std::ofstream(bad, std::ios::binary) << bytes;
            try {
                if (std::string(name).ends_with(".srw1"))
                    (void)load_snapshot(bad);
                else if (std::string(name).ends_with(".pgm"))
                    (void)read_pgm(bad);
                else
                    (void)read_stream(bad);
            } catch (const FormatError& e) {
                if (e.category() == "format_error") ++rejected;
            }
        }
        ok = ok && rejected == 3;
        detail += " corrupted magic rejected 3/3";
    }
    report(8, "format fidelity", ok, detail);
}

void criterion_9_pipeline_rules() {
    bool ok = true;
    std::string detail;

    // strict 5% filter
    {
        auto with_count = [](int n_on) {
            PatchRecord rec;
            rec.image = ImageF(20, 20);
            rec.mask = BinaryMask(20, 20);
            for (int i = 0; i < n_on; ++i) rec.mask.values[static_cast<size_t>(i)] = 1;
            return rec;
        };
        const std::vector<PatchRecord> recs = {with_count(20), with_count(21)};  // 5.00%, 5.25%
        const std::vector<PatchRecord> kept = filter_by_label_area(recs, 0.05);
        ok = ok && kept.size() == 1 && kept[0].mask.count() == 21;
        detail += "5% filter strict;";
    }

    // 6x6 grid of 224^2 patches
    {
        ImageF img(1344, 1344);
        BinaryMask mask(1344, 1344);
        const std::vector<PatchRecord> recs = extract_patch_grid(img, mask, 6, 224, true, "g");
        bool sizes_ok = recs.size() == 36;
        for (const PatchRecord& r : recs)
            sizes_ok = sizes_ok && r.image.height == 224 && r.image.width == 224;
        ok = ok && sizes_ok;
        detail += " 6x6 grid -> 36x224^2;";
    }

    // ROI crops limited to N*224, N <= 4
    {
        ImageF img(1000, 1000);
        bool roi_ok = true;
        try {
            (void)roi_crop_multiple(img, {0, 0}, {4, 4}, 224);
        } catch (...) {
            roi_ok = false;
        }
        try {
            (void)roi_crop_multiple(img, {0, 0}, {5, 1}, 224);
            roi_ok = false;  // must throw
        } catch (const ContractViolation&) {
        }
        ok = ok && roi_ok;
        detail += " roi N<=4 enforced;";
    }

    // augmentation rates within 3-sigma binomial bounds over 10,000 trials
    {
        PatchRecord rec;
        rec.image = ImageF(8, 8);
        rec.mask = BinaryMask(8, 8);
        AugmentPolicy policy;  // 0.33 / 0.33 / 0.5 defaults
        const int n = 10000;
        int flips = 0, rots = 0, noises = 0;
        for (int i = 0; i < n; ++i) {
            Rng rng(Rng::derive(91, static_cast<uint64_t>(i)));
            AugmentOutcome outcome;
            (void)augment(rec, policy, rng, &outcome);
            flips += outcome.hflip ? 1 : 0;
            rots += outcome.rot_degrees != 0 ? 1 : 0;
            noises += outcome.noise_sigma > 0.0 ? 1 : 0;
        }
        auto within = [n](int count, double p) {
            const double margin = 3.0 * std::sqrt(p * (1.0 - p) / n);
            return std::abs(static_cast<double>(count) / n - p) <= margin;
        };
        const bool rates_ok =
            within(flips, policy.p_hflip) && within(rots, policy.p_rot) && within(noises, policy.p_noise);
        ok = ok && rates_ok;
        char buf[96];
        std::snprintf(buf, sizeof buf, " aug rates %.4f/%.4f/%.4f within 3 sigma",
                      flips / 1e4, rots / 1e4, noises / 1e4);
        detail += buf;
    }
    report(9, "pipeline rules pinned", ok, detail);
}

}  // namespace

int main() {
    const fs::path out_dir = "acceptance_out";
    fs::create_directories(out_dir);

    const auto t0 = Clock::now();
    criterion_1_gradients();
    criterion_2_loss_identities();
    const TransferArtifacts transfer = criterion_3_transfer(out_dir);
    criterion_4_robustness(transfer.best_weights, out_dir);
    criterion_5_subcumulative(transfer.best_weights, out_dir);
    criterion_6_determinism(transfer.best_weights, out_dir);
    criterion_7_throughput(transfer.best_weights, out_dir);
    criterion_8_formats(out_dir);
    criterion_9_pipeline_rules();

    std::printf("%d/9 criteria passed in %.0f s\n", 9 - failures, seconds_since(t0));
    return failures;
}
