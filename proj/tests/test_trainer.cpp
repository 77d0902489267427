#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bioseg/phantom.hpp"
#include "bioseg/trainer.hpp"

using namespace bioseg;
namespace fs = std::filesystem;

namespace {

ModelConfig micro_config(int patch = 16) {
    ModelConfig cfg;
    cfg.init_filters = 4;
    cfg.blocks_down = {1, 1};
    cfg.blocks_up = {1};
    cfg.patch_size = patch;
    return cfg;
}

// patch records cut from source-style phantoms
std::vector<PatchRecord> phantom_patches(int count, int patch, uint64_t seed,
                                         PhantomStyle style = PhantomStyle::source) {
    std::vector<PatchRecord> out;
    uint64_t phantom_seed = seed;
    while (static_cast<int>(out.size()) < count) {
        PhantomParams p;
        p.size = patch * 4;
        p.n_trees = 2;
        p.radius_min = 1.5;
        p.radius_max = 3.0;
        p.style = style;
        p.seed = phantom_seed++;
        const Phantom ph = gen_phantom(p);
        std::vector<PatchRecord> recs = extract_patch_grid(
            ph.image, ph.mask, 4, patch, true, "ph" + std::to_string(p.seed),
            style == PhantomStyle::source ? Domain::source : Domain::target);
        recs = filter_by_label_area(recs, 0.05);
        for (PatchRecord& r : recs) {
            out.push_back(std::move(r));
            if (static_cast<int>(out.size()) == count) break;
        }
    }
    return out;
}

TrainConfig fast_config(ModelConfig model, int epochs, double lr, uint64_t seed) {
    TrainConfig cfg;
    cfg.model = std::move(model);
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.batch_size = 8;
    cfg.l2_decay = 0.0;
    cfg.seed = seed;
    cfg.augment = false;
    return cfg;
}

}  // namespace

TEST_CASE("rmsprop_step: zero gradient leaves the parameter, decays v") {
    Tensor64 param(1, 1, 1, 2), grad(1, 1, 1, 2), v(1, 1, 1, 2);
    param.data = {1.5, -2.0};
    v.data = {0.04, 0.09};
    rmsprop_step(param, grad, v, RmsPropConfig{1e-3, 0.99, 1e-8, 0.0});
    CHECK(param.data[0] == doctest::Approx(1.5));
    CHECK(param.data[1] == doctest::Approx(-2.0));
    CHECK(v.data[0] == doctest::Approx(0.99 * 0.04).epsilon(1e-12));
    CHECK(v.data[1] == doctest::Approx(0.99 * 0.09).epsilon(1e-12));
}

TEST_CASE("rmsprop_step matches the hand recurrence for one step") {
    // g = 1, v0 = 0, alpha = 0.99, eps = 1e-8, lr = 1e-5:
    // v = 0.01, delta = -1e-5 / (0.1 + 1e-8)
    Tensor64 param(1, 1, 1, 1), grad(1, 1, 1, 1), v(1, 1, 1, 1);
    param.data = {0.0};
    grad.data = {1.0};
    rmsprop_step(param, grad, v, RmsPropConfig{1e-5, 0.99, 1e-8, 0.0});
    CHECK(v.data[0] == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(param.data[0] == doctest::Approx(-1e-5 / (0.1 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("two optimizers with identical gradient streams stay identical") {
    Rng rng(81);
    Tensor64 p1(1, 1, 2, 2), p2(1, 1, 2, 2), v1(1, 1, 2, 2), v2(1, 1, 2, 2);
    for (size_t i = 0; i < 4; ++i) p1.data[i] = p2.data[i] = rng.normal();
    const RmsPropConfig cfg{1e-3, 0.99, 1e-8, 1e-4};
    for (int step = 0; step < 25; ++step) {
        Tensor64 g(1, 1, 2, 2);
        for (auto& gv : g.data) gv = rng.normal();
        rmsprop_step(p1, g, v1, cfg);
        rmsprop_step(p2, g, v2, cfg);
    }
    CHECK(p1.data == p2.data);
    CHECK(v1.data == v2.data);
}

TEST_CASE("l2 decay with zero gradient strictly shrinks the parameter norm") {
    Tensor64 param(1, 1, 1, 3), grad(1, 1, 1, 3), v(1, 1, 1, 3);
    param.data = {2.0, -1.0, 0.5};
    double norm_before = 0.0;
    for (double x : param.data) norm_before += x * x;
    rmsprop_step(param, grad, v, RmsPropConfig{1e-2, 0.99, 1e-8, 1e-2});
    double norm_after = 0.0;
    for (double x : param.data) norm_after += x * x;
    CHECK(norm_after < norm_before);
}

TEST_CASE("train with lr=0 is a null optimizer") {
    const ModelConfig mc = micro_config();
    std::vector<PatchRecord> records = phantom_patches(10, 16, 200);
    auto [train_set, val_set] = split_train_val(records, 0.2, 1);

    SegResNet model(mc, 7);
    const WeightSnapshot before = snapshot(model);

    TrainConfig cfg = fast_config(mc, 3, 0.0, 1);
    cfg.batch_size = static_cast<int>(train_set.size());  // one batch per epoch
    const TrainResult result = train(model, train_set, val_set, cfg);

    const WeightSnapshot after = snapshot(model);
    for (size_t i = 0; i < before.params.size(); ++i)
        CHECK(before.params[i].second.data == after.params[i].second.data);

    // same single batch, same weights -> identical train loss every epoch
    REQUIRE(result.history.size() == 4);  // baseline + 3 epochs
    CHECK(result.history[1].train_loss == doctest::Approx(result.history[2].train_loss));
    CHECK(result.history[2].train_loss == doctest::Approx(result.history[3].train_loss));
}

TEST_CASE("desk-scale training improves validation dice") {
    const ModelConfig mc = micro_config();
    std::vector<PatchRecord> records = phantom_patches(48, 16, 300);
    auto [train_set, val_set] = split_train_val(records, 0.15, 2);

    SegResNet model(mc, 8);
    TrainConfig cfg = fast_config(mc, 8, 3e-4, 2);
    const TrainResult result = train(model, train_set, val_set, cfg);

    const double dice_before = result.history.front().val_dice;
    CHECK(result.best.val_dice > dice_before);
    // best checkpoint has the smallest validation loss in the log
    for (const EpochLog& row : result.history) CHECK(result.best.val_loss <= row.val_loss);
}

TEST_CASE("same seed reruns produce byte-identical best checkpoints") {
    const ModelConfig mc = micro_config();
    std::vector<PatchRecord> records = phantom_patches(16, 16, 400);
    auto [train_set, val_set] = split_train_val(records, 0.2, 3);

    const fs::path dir = fs::temp_directory_path() / "bioseg_test_train";
    fs::create_directories(dir);

    auto run = [&](const fs::path& out) {
        SegResNet model(mc, 9);
        TrainConfig cfg = fast_config(mc, 3, 3e-4, 3);
        cfg.augment = true;  // exercise the augmentation rng determinism too
        return train_to_dir(model, train_set, val_set, cfg, out);
    };
    (void)run(dir / "a");
    (void)run(dir / "b");

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp(dir / "a" / "best.srw1") == slurp(dir / "b" / "best.srw1"));
    CHECK(slurp(dir / "a" / "last.srw1") == slurp(dir / "b" / "last.srw1"));
    CHECK(slurp(dir / "a" / "train_log.csv") == slurp(dir / "b" / "train_log.csv"));
}

TEST_CASE("non-finite loss aborts with epoch and batch index") {
    const ModelConfig mc = micro_config();
    std::vector<PatchRecord> records = phantom_patches(8, 16, 500);
    std::vector<PatchRecord> train_set(records.begin(), records.begin() + 6);
    std::vector<PatchRecord> val_set(records.begin() + 6, records.end());
    train_set[2].image.px[10] = std::numeric_limits<float>::quiet_NaN();

    SegResNet model(mc, 10);
    TrainConfig cfg = fast_config(mc, 2, 1e-4, 4);
    try {
        (void)train(model, train_set, val_set, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("batch") != std::string::npos);
    }
}

TEST_CASE("training loss non-increasing on a single repeated batch (<=5 exceptions in 50)") {
    const ModelConfig mc = micro_config();
    std::vector<PatchRecord> batch = phantom_patches(4, 16, 600);

    SegResNet model(mc, 11);
    RmsProp opt(RmsPropConfig{3e-4, 0.99, 1e-8, 0.0});
    auto params = model.named_parameters();
    const LossWeights weights;

    Tensor x(4, 1, 16, 16), t(4, 1, 16, 16);
    for (size_t b = 0; b < 4; ++b) {
        std::copy(batch[b].image.px.begin(), batch[b].image.px.end(),
                  x.data.begin() + static_cast<ptrdiff_t>(b * 256));
        for (size_t i = 0; i < 256; ++i)
            t.data[b * 256 + i] = static_cast<float>(batch[b].mask.values[i]);
    }

    double prev = std::numeric_limits<double>::infinity();
    int violations = 0;
    for (int step = 0; step < 50; ++step) {
        const Tensor probs = model.forward(x, nn::Mode::train);
        const LossValueGrad<float> loss = combined_loss(probs, t, weights);
        if (loss.value > prev) ++violations;
        prev = loss.value;
        model.zero_grad();
        model.backward(loss.grad);
        opt.step(params);
    }
    CHECK(violations <= 5);
}

TEST_CASE("finetune with zero epochs returns the pretrained weights unchanged") {
    const ModelConfig mc = micro_config();
    const fs::path dir = fs::temp_directory_path() / "bioseg_test_ft";
    fs::create_directories(dir);
    const fs::path weights_file = dir / "pre.srw1";

    SegResNet pretrained(mc, 12);
    (void)pretrained.forward(Tensor(2, 1, 16, 16), nn::Mode::train);
    save_weights(pretrained, weights_file);

    std::vector<PatchRecord> records = phantom_patches(8, 16, 700);
    auto [train_set, val_set] = split_train_val(records, 0.2, 5);

    TrainConfig cfg = fast_config(mc, 0, 1e-4, 5);
    const TrainResult result = finetune(weights_file, train_set, val_set, cfg);

    const WeightSnapshot original = load_snapshot(weights_file);
    REQUIRE(result.best.weights.params.size() == original.params.size());
    for (size_t i = 0; i < original.params.size(); ++i)
        CHECK(result.best.weights.params[i].second.data == original.params[i].second.data);
}

TEST_CASE("finetune rejects weights whose config mismatches") {
    const fs::path dir = fs::temp_directory_path() / "bioseg_test_ft";
    fs::create_directories(dir);
    const fs::path weights_file = dir / "mismatch.srw1";
    SegResNet pretrained(micro_config(16), 13);
    save_weights(pretrained, weights_file);

    std::vector<PatchRecord> records = phantom_patches(8, 32, 800);
    auto [train_set, val_set] = split_train_val(records, 0.2, 6);
    TrainConfig cfg = fast_config(micro_config(32), 1, 1e-4, 6);
    CHECK_THROWS_AS((void)finetune(weights_file, train_set, val_set, cfg), FormatError);
}

TEST_CASE("evaluate_dataset: aggregation oracle, self-consistent ground truth, empty output") {
    const ModelConfig mc = micro_config();
    SegResNet model(mc, 14);
    std::vector<PatchRecord> records = phantom_patches(6, 16, 900);

    // ground truth defined as the model's own output -> Dice exactly 1
    std::vector<PatchRecord> self = records;
    for (PatchRecord& rec : self) {
        Tensor x(1, 1, 16, 16);
        std::copy(rec.image.px.begin(), rec.image.px.end(), x.data.begin());
        rec.mask = binarize(model.forward(x, nn::Mode::infer), 0.5f);
    }
    const MetricsReport perfect = evaluate_dataset(model, self);
    CHECK(perfect.dice.mean == doctest::Approx(1.0));

    // aggregation equals a recomputed mean/std
    const MetricsReport report = evaluate_dataset(model, records);
    double mean = 0.0;
    for (const RecordMetrics& row : report.rows) mean += row.dice;
    mean /= static_cast<double>(report.rows.size());
    double var = 0.0;
    for (const RecordMetrics& row : report.rows) var += (row.dice - mean) * (row.dice - mean);
    var /= static_cast<double>(report.rows.size());
    CHECK(report.dice.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(report.dice.stddev == doctest::Approx(std::sqrt(var)).epsilon(1e-9));

    // a head biased to minus infinity predicts empty masks -> Dice 0 vs nonempty
    SegResNet empty_model(mc, 15);
    for (auto& [name, p] : empty_model.named_parameters())
        if (name == "head.bias")
            for (auto& v : p->data) v = -40.0f;
    const MetricsReport zero = evaluate_dataset(empty_model, records);
    CHECK(zero.dice.mean == doctest::Approx(0.0));
}

TEST_CASE("train config file roundtrip and unknown-key rejection") {
    const fs::path dir = fs::temp_directory_path() / "bioseg_test_cfg";
    fs::create_directories(dir);
    const fs::path file = dir / "train.cfg";

    TrainConfig cfg = fast_config(micro_config(), 12, 2.5e-4, 42);
    cfg.aug.p_noise = 0.4;
    cfg.loss_weights.lambda2 = 0.2;
    train_config_to_file(cfg, file);
    const TrainConfig back = train_config_from_file(file);
    CHECK(back.lr == doctest::Approx(cfg.lr));
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.seed == cfg.seed);
    CHECK(back.aug.p_noise == doctest::Approx(0.4));
    CHECK(back.loss_weights.lambda2 == doctest::Approx(0.2));
    CHECK(back.model.patch_size == cfg.model.patch_size);
    CHECK(back.model.blocks_down == cfg.model.blocks_down);

    std::ofstream(file, std::ios::app) << "mystery_key=1\n";
    CHECK_THROWS_AS((void)train_config_from_file(file), FormatError);
}
