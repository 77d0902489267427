// bioseg command line: phantom/stream generation, patch preparation,
// training, inference and the evaluation experiments.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "bioseg/error.hpp"
#include "bioseg/experiments.hpp"
#include "bioseg/gradcheck.hpp"
#include "bioseg/model.hpp"
#include "bioseg/patches.hpp"
#include "bioseg/phantom.hpp"
#include "bioseg/stream.hpp"
#include "bioseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace bioseg;

namespace {

int exit_code_for(const Error& e) {
    if (e.category() == "contract_violation") return 2;
    if (e.category() == "format_error") return 3;
    if (e.category() == "divergence") return 4;
    if (e.category() == "io_error") return 5;
    return 1;
}

ImageF load_image_normalized(const fs::path& path) {
    return normalize(pgm_to_float(read_pgm(path)));
}

std::vector<fs::path> list_eval_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (!name.ends_with(".pgm")) continue;
        if (name.ends_with(".mask.pgm")) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct GenPhantomArgs {
    std::string style = "source";
    uint64_t seed = 0;
    int size = 224;
    std::string out;
    int count = 1;
    int trees = 3;
    double radius_min = 2.0;
    double radius_max = 5.0;
    double contrast = 0.55;
    double branch_prob = 0.08;
};

int cmd_gen_phantom(const GenPhantomArgs& args) {
    fs::create_directories(args.out);
    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < args.count; ++i) {
        PhantomParams params;
        params.size = args.size;
        params.style = style_from_name(args.style);
        params.seed = Rng::derive(args.seed, static_cast<uint64_t>(i));
        params.n_trees = args.trees;
        params.radius_min = args.radius_min;
        params.radius_max = args.radius_max;
        params.vessel_contrast = args.contrast;
        params.branch_prob = args.branch_prob;

        const Phantom phantom = gen_phantom(params);
        const std::string stem =
            "phantom_" + args.style + "_" + std::to_string(args.seed) + "_" + std::to_string(i);
        const fs::path img_path = fs::path(args.out) / (stem + ".img.pgm");
        const fs::path mask_path = fs::path(args.out) / (stem + ".mask.pgm");
        write_pgm(float_to_pgm16(phantom.image), img_path);
        write_pgm(mask_to_pgm(phantom.mask), mask_path);
        manifest.push_back(ManifestEntry{img_path, mask_path, params.style == PhantomStyle::source
                                                                  ? Domain::source
                                                                  : Domain::target,
                                         stem});
    }
    write_manifest(manifest, fs::path(args.out) / "manifest.csv");
    std::printf("wrote %d %s phantom(s) to %s\n", args.count, args.style.c_str(),
                args.out.c_str());
    return 0;
}

struct GenStreamArgs {
    std::string phantom, mask, out;
    int frames = 120;
    double fps = 19.6;
    std::string motion = "static";
    double amplitude = 0.0;
    double period = 4.0;
    double noise = 0.0;
    uint64_t seed = 0;
};

int cmd_gen_stream(const GenStreamArgs& args) {
    const ImageF phantom = load_image_normalized(args.phantom);
    const BinaryMask mask = pgm_to_mask(read_pgm(args.mask));

    MotionModel motion;
    if (args.motion == "static") {
        motion.kind = MotionKind::motion_static;
    } else if (args.motion == "sin") {
        motion.kind = MotionKind::sinusoidal;
        motion.amplitude_px = args.amplitude;
        motion.period_s = args.period;
    } else {
        throw ContractViolation("gen-stream: motion must be static|sin");
    }

    const FrameStream stream =
        gen_stream(phantom, mask, args.frames, args.fps, motion, args.noise, args.seed);
    write_stream(stream, args.out);
    std::printf("wrote %d-frame stream (%.1f fps) to %s\n", stream.n_frames(),
                static_cast<double>(stream.fps), args.out.c_str());
    return 0;
}

struct PreparePatchesArgs {
    std::string manifest, out;
    int grid = 6;
    int patch = 224;
    double min_label = 0.05;
    uint64_t seed = 0;
};

int cmd_prepare_patches(const PreparePatchesArgs& args) {
    const std::vector<ManifestEntry> entries = read_manifest(args.manifest);
    std::vector<PatchRecord> all;
    for (const ManifestEntry& e : entries) {
        const ImageF image = load_image_normalized(e.image_path);
        const BinaryMask mask = pgm_to_mask(read_pgm(e.mask_path));
        std::vector<PatchRecord> records =
            extract_patch_grid(image, mask, args.grid, args.patch, true, e.source_id, e.domain);
        for (PatchRecord& rec : records) all.push_back(std::move(rec));
    }
    const size_t before = all.size();
    all = filter_by_label_area(all, args.min_label);
    write_patch_cache(all, args.out);
    std::printf("kept %zu/%zu patches (label area > %.4f) in %s\n", all.size(), before,
                args.min_label, args.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string config, data, out;
    double val_frac = 0.1;
    std::string init;
    std::optional<uint64_t> seed;
};

int cmd_train(const TrainArgs& args, bool is_finetune) {
    TrainConfig config = train_config_from_file(args.config);
    if (args.seed) config.seed = *args.seed;

    const std::vector<PatchRecord> records = read_patch_cache(args.data);
    if (records.size() < 2)
        throw ContractViolation("training needs at least 2 patches in the data directory");
    auto [train_set, val_set] = split_train_val(records, args.val_frac, config.seed);

    TrainResult result;
    if (is_finetune) {
        if (args.init.empty())
            throw ContractViolation("finetune requires --init pretrained weights");
        result = finetune(args.init, train_set, val_set, config, fs::path(args.out));
    } else {
        SegResNet model(config.model, config.seed);
        std::string provenance = "random";
        if (!args.init.empty()) {
            const WeightSnapshot snap = load_snapshot(args.init);
            if (!(snap.config == config.model))
                throw FormatError("--init weight config does not match training config");
            restore(model, snap);
            provenance = "weights:" + args.init;
        }
        result = train_to_dir(model, train_set, val_set, config, args.out, provenance);
    }

    std::printf("trained %d epoch(s) on %zu/%zu patches; best epoch %d val_loss %.6f val_dice %.4f\n",
                config.epochs, train_set.size(), val_set.size(), result.best.epoch,
                result.best.val_loss, result.best.val_dice);
    return 0;
}

struct InferArgs {
    std::string weights, image, out;
    uint64_t seed = 0;
};

int cmd_infer(const InferArgs& args) {
    SegResNet model = load_weights<float>(args.weights);
    const ImageF image = load_image_normalized(args.image);
    const BinaryMask mask = tiled_infer(model, image);
    write_pgm(mask_to_pgm(mask), args.out);
    std::printf("wrote mask (%zu positive px) to %s\n", mask.count(), args.out.c_str());
    return 0;
}

struct StreamArgs {
    std::string weights, stream, out;
    int gate = 0;
    int stride = 0;
    uint64_t seed = 0;
};

int cmd_stream(const StreamArgs& args) {
    SegResNet model = load_weights<float>(args.weights);
    const FrameStream stream = read_stream(args.stream);
    if (args.gate < 1) throw ContractViolation("stream: --gate must be >= 1");

    fs::create_directories(args.out);
    const std::vector<Window> windows =
        subcumulative_windows(stream, GateSpec{args.gate, args.stride});

    Report report;
    report.experiment_id = "stream_windows";
    report.seed = args.seed;
    report.echo("gate_frames", std::to_string(args.gate));
    report.echo("stride_frames", args.stride > 0 ? std::to_string(args.stride) : "gate");
    report.echo("fps", fmt_f(stream.fps, 3));
    report.columns = {"window_start", "duration_s", "mask_path", "positive_px"};

    for (const Window& w : windows) {
        const BinaryMask mask = tiled_infer(model, w.image);
        const std::string name = "win_" + std::to_string(w.start) + ".mask.pgm";
        write_pgm(mask_to_pgm(mask), fs::path(args.out) / name);
        report.rows.push_back({std::to_string(w.start), fmt_f(w.duration_s, 2), name,
                               std::to_string(mask.count())});
    }
    report.write_csv(fs::path(args.out) / "windows.csv");
    std::printf("segmented %zu window(s) into %s\n", windows.size(), args.out.c_str());
    return 0;
}

struct EvalRobustnessArgs {
    std::string weights, data, report;
    double noise_sigma = 0.10;
    bool no_largest_component = false;
    uint64_t seed = 0;
};

int cmd_eval_robustness(const EvalRobustnessArgs& args) {
    ModelSegmenter segmenter(load_weights<float>(args.weights));
    std::vector<ImageF> images;
    for (const fs::path& p : list_eval_images(args.data))
        images.push_back(load_image_normalized(p));
    if (images.empty()) throw ContractViolation("eval-robustness: no .pgm images in --data");

    RobustnessOptions options;
    options.noise_sigma = args.noise_sigma;
    options.use_largest_component = !args.no_largest_component;
    options.seed = args.seed;

    const RobustnessResult result = run_robustness(segmenter, images, options);
    result.report.write_csv(args.report);
    for (const RobustnessSummary& s : result.summaries)
        std::printf("%-8s dice %.4f +- %.4f\n", s.transform.c_str(), s.dice.mean, s.dice.stddev);
    return 0;
}

struct EvalConsistencyArgs {
    std::string weights, image, report;
    int repeats = 3;
    uint64_t seed = 0;
};

int cmd_eval_consistency(const EvalConsistencyArgs& args) {
    const ImageF image = load_image_normalized(args.image);
    auto factory = [&args]() -> std::unique_ptr<Segmenter> {
        return std::make_unique<ModelSegmenter>(load_weights<float>(args.weights));
    };
    const ConsistencyResult result = run_consistency(factory, image, args.repeats, 2, args.seed);
    result.report.write_csv(args.report);
    const SummaryStats d = summarize(result.pairwise_dice);
    std::printf("consistency over %d repeats: mean pairwise dice %.4f\n", args.repeats, d.mean);
    return 0;
}

struct EvalSubcumArgs {
    std::string weights, stream, report;
    std::vector<int> gates;
    int stride = 0;
    uint64_t seed = 0;
};

int cmd_eval_subcum(const EvalSubcumArgs& args) {
    ModelSegmenter segmenter(load_weights<float>(args.weights));
    const FrameStream stream = read_stream(args.stream);
    const std::vector<int> gates = args.gates.empty() ? default_gates() : args.gates;

    const SubcumulativeResult result =
        run_subcumulative(segmenter, stream, gates, args.stride, args.seed);
    result.report.write_csv(args.report);
    for (const SubcumulativeGate& g : result.gates)
        std::printf("gate %3d (%5.2f s): dice %.4f +- %.4f (stderr)\n", g.gate_frames,
                    g.duration_s, g.dice.mean, g.dice.stderr_mean);
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    const std::vector<GradCheckCase> cases = run_all_gradchecks(seed);
    bool all_ok = true;
    for (const GradCheckCase& c : cases) {
        std::printf("%-36s max_rel_err %.3e %s %.0e  [%s]\n", c.name.c_str(), c.max_rel_err,
                    c.expect_failure ? ">" : "<", c.tolerance, c.passed ? "ok" : "FAIL");
        all_ok = all_ok && c.passed;
    }
    return all_ok ? 0 : 1;
}

struct BenchLatencyArgs {
    std::string weights, report;
    int warmup = 10;
    int trials = 100;
    uint64_t seed = 0;
};

int cmd_bench_latency(const BenchLatencyArgs& args) {
    SegResNet model = load_weights<float>(args.weights);
    const LatencyStats stats = measure_latency(model, args.warmup, args.trials);
    if (!args.report.empty()) write_latency_csv(stats, args.report);
    std::printf("per-patch latency: mean %.6f s  p50 %.6f s  p99 %.6f s  (%.1f patches/s)\n",
                stats.mean_s, stats.p50_s, stats.p99_s, 1.0 / stats.mean_s);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vessel-feature segmentation pipeline"};
    app.require_subcommand(1);

    GenPhantomArgs gp;
    CLI::App* gen_phantom_cmd = app.add_subcommand("gen-phantom", "generate synthetic phantoms");
    gen_phantom_cmd->add_option("--style", gp.style, "source|target")->required();
    gen_phantom_cmd->add_option("--seed", gp.seed, "rng seed");
    gen_phantom_cmd->add_option("--size", gp.size, "image size in px");
    gen_phantom_cmd->add_option("--out", gp.out, "output directory")->required();
    gen_phantom_cmd->add_option("--count", gp.count, "number of phantoms");
    gen_phantom_cmd->add_option("--trees", gp.trees, "vessel trees per phantom");
    gen_phantom_cmd->add_option("--radius-min", gp.radius_min, "min vessel radius px");
    gen_phantom_cmd->add_option("--radius-max", gp.radius_max, "max vessel radius px");
    gen_phantom_cmd->add_option("--contrast", gp.contrast, "vessel darkening fraction");
    gen_phantom_cmd->add_option("--branch-prob", gp.branch_prob, "per-step branch probability");

    GenStreamArgs gs;
    CLI::App* gen_stream_cmd = app.add_subcommand("gen-stream", "render a frame stream");
    gen_stream_cmd->add_option("--phantom", gs.phantom, "phantom image PGM")->required();
    gen_stream_cmd->add_option("--mask", gs.mask, "phantom mask PGM")->required();
    gen_stream_cmd->add_option("--frames", gs.frames, "frame count");
    gen_stream_cmd->add_option("--fps", gs.fps, "frames per second");
    gen_stream_cmd->add_option("--motion", gs.motion, "static|sin");
    gen_stream_cmd->add_option("--amplitude", gs.amplitude, "motion amplitude px");
    gen_stream_cmd->add_option("--period", gs.period, "motion period s");
    gen_stream_cmd->add_option("--noise", gs.noise, "shot-noise scale");
    gen_stream_cmd->add_option("--seed", gs.seed, "rng seed");
    gen_stream_cmd->add_option("--out", gs.out, "output CVS1 file")->required();

    PreparePatchesArgs pp;
    CLI::App* prepare_cmd = app.add_subcommand("prepare-patches", "grid-crop and filter patches");
    prepare_cmd->add_option("--manifest", pp.manifest, "dataset manifest CSV")->required();
    prepare_cmd->add_option("--grid", pp.grid, "grid size N (N^2 patches)");
    prepare_cmd->add_option("--patch", pp.patch, "patch size px");
    prepare_cmd->add_option("--min-label", pp.min_label, "strict label-area threshold");
    prepare_cmd->add_option("--out", pp.out, "patch cache directory")->required();
    prepare_cmd->add_option("--seed", pp.seed, "rng seed");

    TrainArgs pre, fin;
    CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "train from random init");
    pretrain_cmd->add_option("--config", pre.config, "training config file")->required();
    pretrain_cmd->add_option("--data", pre.data, "patch cache directory")->required();
    pretrain_cmd->add_option("--val-frac", pre.val_frac, "validation fraction");
    pretrain_cmd->add_option("--out", pre.out, "output directory")->required();
    pretrain_cmd->add_option("--init", pre.init, "optional initial weights");
    uint64_t pre_seed = 0;
    CLI::Option* pre_seed_opt = pretrain_cmd->add_option("--seed", pre_seed, "override config seed");

    CLI::App* finetune_cmd = app.add_subcommand("finetune", "fine-tune pretrained weights");
    finetune_cmd->add_option("--config", fin.config, "training config file")->required();
    finetune_cmd->add_option("--data", fin.data, "patch cache directory")->required();
    finetune_cmd->add_option("--val-frac", fin.val_frac, "validation fraction");
    finetune_cmd->add_option("--out", fin.out, "output directory")->required();
    finetune_cmd->add_option("--init", fin.init, "pretrained weights")->required();
    uint64_t fin_seed = 0;
    CLI::Option* fin_seed_opt = finetune_cmd->add_option("--seed", fin_seed, "override config seed");

    InferArgs inf;
    CLI::App* infer_cmd = app.add_subcommand("infer", "segment one image");
    infer_cmd->add_option("--weights", inf.weights, "SRW1 weights")->required();
    infer_cmd->add_option("--image", inf.image, "input PGM (patch-multiple dims)")->required();
    infer_cmd->add_option("--out", inf.out, "output mask PGM")->required();
    infer_cmd->add_option("--seed", inf.seed, "rng seed (unused, accepted)");

    StreamArgs st;
    CLI::App* stream_cmd = app.add_subcommand("stream", "segment sub-cumulative windows");
    stream_cmd->add_option("--weights", st.weights, "SRW1 weights")->required();
    stream_cmd->add_option("--stream", st.stream, "CVS1 stream file")->required();
    stream_cmd->add_option("--gate", st.gate, "gate length in frames")->required();
    stream_cmd->add_option("--stride", st.stride, "window stride (default: gate)");
    stream_cmd->add_option("--out", st.out, "output directory")->required();
    stream_cmd->add_option("--seed", st.seed, "rng seed");

    EvalRobustnessArgs er;
    CLI::App* rob_cmd = app.add_subcommand("eval-robustness", "rotation/noise robustness");
    rob_cmd->add_option("--weights", er.weights, "SRW1 weights")->required();
    rob_cmd->add_option("--data", er.data, "directory of test images")->required();
    rob_cmd->add_option("--report", er.report, "output CSV")->required();
    rob_cmd->add_option("--noise-sigma", er.noise_sigma, "noise magnitude");
    rob_cmd->add_flag("--no-largest-component", er.no_largest_component,
                      "compare raw masks instead of largest components");
    rob_cmd->add_option("--seed", er.seed, "rng seed");

    EvalConsistencyArgs ec;
    CLI::App* con_cmd = app.add_subcommand("eval-consistency", "repeat-run consistency");
    con_cmd->add_option("--weights", ec.weights, "SRW1 weights")->required();
    con_cmd->add_option("--image", ec.image, "input PGM")->required();
    con_cmd->add_option("--repeats", ec.repeats, "number of repeats");
    con_cmd->add_option("--report", ec.report, "output CSV")->required();
    con_cmd->add_option("--seed", ec.seed, "rng seed");

    EvalSubcumArgs es;
    CLI::App* sub_cmd = app.add_subcommand("eval-subcum", "sub-cumulative gate curve");
    sub_cmd->add_option("--weights", es.weights, "SRW1 weights")->required();
    sub_cmd->add_option("--stream", es.stream, "CVS1 stream")->required();
    sub_cmd->add_option("--gates", es.gates, "gate list (default 10..120 step 10)");
    sub_cmd->add_option("--stride", es.stride, "window stride (default: gate)");
    sub_cmd->add_option("--report", es.report, "output CSV")->required();
    sub_cmd->add_option("--seed", es.seed, "rng seed");

    uint64_t gc_seed = 42;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gc_cmd->add_option("--seed", gc_seed, "rng seed");

    BenchLatencyArgs bl;
    CLI::App* lat_cmd = app.add_subcommand("bench-latency", "per-patch inference timing");
    lat_cmd->add_option("--weights", bl.weights, "SRW1 weights")->required();
    lat_cmd->add_option("--warmup", bl.warmup, "warmup iterations");
    lat_cmd->add_option("--trials", bl.trials, "timed iterations");
    lat_cmd->add_option("--report", bl.report, "output CSV");
    lat_cmd->add_option("--seed", bl.seed, "rng seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_phantom_cmd->parsed()) return cmd_gen_phantom(gp);
        if (gen_stream_cmd->parsed()) return cmd_gen_stream(gs);
        if (prepare_cmd->parsed()) return cmd_prepare_patches(pp);
        if (pretrain_cmd->parsed()) {
            if (pre_seed_opt->count()) pre.seed = pre_seed;
            return cmd_train(pre, false);
        }
        if (finetune_cmd->parsed()) {
            if (fin_seed_opt->count()) fin.seed = fin_seed;
            return cmd_train(fin, true);
        }
        if (infer_cmd->parsed()) return cmd_infer(inf);
        if (stream_cmd->parsed()) return cmd_stream(st);
        if (rob_cmd->parsed()) return cmd_eval_robustness(er);
        if (con_cmd->parsed()) return cmd_eval_consistency(ec);
        if (sub_cmd->parsed()) return cmd_eval_subcum(es);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc_seed);
        if (lat_cmd->parsed()) return cmd_bench_latency(bl);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
