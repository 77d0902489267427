#include "bioseg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace bioseg {

void TrainConfig::validate() const {
    if (lr < 0.0) throw ContractViolation("TrainConfig: lr must be >= 0");
    if (batch_size < 1) throw ContractViolation("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw ContractViolation("TrainConfig: epochs must be >= 0");
    if (l2_decay < 0.0) throw ContractViolation("TrainConfig: l2_decay must be >= 0");
    if (rmsprop_alpha <= 0.0 || rmsprop_alpha >= 1.0)
        throw ContractViolation("TrainConfig: rmsprop_alpha must lie in (0,1)");
    if (rmsprop_eps <= 0.0) throw ContractViolation("TrainConfig: rmsprop_eps must be positive");
    if (loss_weights.lambda1 < 0.0 || loss_weights.lambda2 < 0.0)
        throw ContractViolation("TrainConfig: loss weights must be >= 0");
    if (loss_weights.dice_smooth <= 0.0)
        throw ContractViolation("TrainConfig: dice_smooth must be positive");
    model.validate();
}

namespace {

Tensor records_to_input(const std::vector<PatchRecord>& records,
                        const std::vector<size_t>& idx, size_t lo, size_t hi, int patch) {
    Tensor x(static_cast<int>(hi - lo), 1, patch, patch);
    for (size_t b = lo; b < hi; ++b) {
        const PatchRecord& rec = records[idx[b]];
        if (rec.image.height != patch || rec.image.width != patch)
            throw ContractViolation("train: patch size incompatible with model config");
        std::copy(rec.image.px.begin(), rec.image.px.end(),
                  x.data.begin() + static_cast<ptrdiff_t>((b - lo) * rec.image.size()));
    }
    return x;
}

Tensor records_to_target(const std::vector<PatchRecord>& records,
                         const std::vector<size_t>& idx, size_t lo, size_t hi, int patch) {
    Tensor t(static_cast<int>(hi - lo), 1, patch, patch);
    for (size_t b = lo; b < hi; ++b) {
        const BinaryMask& m = records[idx[b]].mask;
        if (m.height != patch || m.width != patch)
            throw ContractViolation("train: mask size incompatible with model config");
        for (size_t i = 0; i < m.values.size(); ++i)
            t.data[(b - lo) * m.values.size() + i] = static_cast<float>(m.values[i]);
    }
    return t;
}

}  // namespace

SplitEval evaluate_split(SegResNet& model, const std::vector<PatchRecord>& records,
                         const LossWeights& weights, int batch_size) {
    if (records.empty()) throw ContractViolation("evaluate_split: empty record set");
    const int patch = model.config().patch_size;
    std::vector<size_t> idx(records.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    double loss_sum = 0.0;
    double dice_sum = 0.0;
    for (size_t lo = 0; lo < records.size(); lo += static_cast<size_t>(batch_size)) {
        const size_t hi = std::min(records.size(), lo + static_cast<size_t>(batch_size));
        const Tensor x = records_to_input(records, idx, lo, hi, patch);
        const Tensor t = records_to_target(records, idx, lo, hi, patch);
        const Tensor probs = model.forward(x, nn::Mode::infer);
        loss_sum += combined_loss(probs, t, weights).value * static_cast<double>(hi - lo);

        const size_t per = static_cast<size_t>(patch) * patch;
        for (size_t b = lo; b < hi; ++b) {
            std::vector<float> plane(probs.data.begin() + static_cast<ptrdiff_t>((b - lo) * per),
                                     probs.data.begin() + static_cast<ptrdiff_t>((b - lo + 1) * per));
            const BinaryMask pred = binarize(plane, patch, patch, 0.5f);
            dice_sum += dice_score(pred, records[idx[b]].mask);
        }
    }
    return SplitEval{loss_sum / static_cast<double>(records.size()),
                     dice_sum / static_cast<double>(records.size())};
}

TrainResult train(SegResNet& model, const std::vector<PatchRecord>& train_set,
                  const std::vector<PatchRecord>& val_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty() || val_set.empty())
        throw ContractViolation("train: train and validation splits must be non-empty");
    if (!(model.config() == config.model))
        throw ContractViolation("train: model does not match config.model");

    RmsProp optimizer(RmsPropConfig{config.lr, config.rmsprop_alpha, config.rmsprop_eps,
                                    config.l2_decay});
    auto params = model.named_parameters();

    TrainResult result;
    const int patch = config.model.patch_size;

    // epoch-0 baseline before any updates
    {
        const SplitEval ev = evaluate_split(model, val_set, config.loss_weights,
                                            config.batch_size);
        result.history.push_back(EpochLog{0, std::nan(""), ev.loss, ev.dice});
        result.best = Checkpoint{0, std::nan(""), ev.loss, ev.dice, snapshot(model)};
    }

    Rng shuffle_rng(Rng::derive(config.seed, 0xA11CE));
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int batch_index = 0;

        for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(config.batch_size)) {
            const size_t hi = std::min(order.size(), lo + static_cast<size_t>(config.batch_size));
            Tensor x(static_cast<int>(hi - lo), 1, patch, patch);
            Tensor t(static_cast<int>(hi - lo), 1, patch, patch);
            for (size_t b = lo; b < hi; ++b) {
                const PatchRecord* rec = &train_set[order[b]];
                PatchRecord augmented;
                if (config.augment) {
                    Rng rec_rng(Rng::derive(config.seed, static_cast<uint64_t>(epoch), order[b]));
                    augmented = augment(*rec, config.aug, rec_rng);
                    rec = &augmented;
                }
                if (rec->image.height != patch || rec->image.width != patch)
                    throw ContractViolation("train: patch size incompatible with model config");
                const size_t per = rec->image.size();
                std::copy(rec->image.px.begin(), rec->image.px.end(),
                          x.data.begin() + static_cast<ptrdiff_t>((b - lo) * per));
                for (size_t i = 0; i < per; ++i)
                    t.data[(b - lo) * per + i] = static_cast<float>(rec->mask.values[i]);
            }

            const Tensor probs = model.forward(x, nn::Mode::train);
            const LossValueGrad<float> loss = combined_loss(probs, t, config.loss_weights);
            if (!std::isfinite(loss.value))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                      " batch " + std::to_string(batch_index));
            epoch_loss += loss.value * static_cast<double>(hi - lo);

            model.zero_grad();
            model.backward(loss.grad);
            optimizer.step(params);
            ++batch_index;
        }
        epoch_loss /= static_cast<double>(train_set.size());

        const SplitEval ev = evaluate_split(model, val_set, config.loss_weights,
                                            config.batch_size);
        result.history.push_back(EpochLog{epoch, epoch_loss, ev.loss, ev.dice});

        const bool improved = config.select_best_val ? ev.loss < result.best.val_loss
                                                     : epoch == config.epochs;
        if (improved || result.best.epoch < 0)
            result.best = Checkpoint{epoch, epoch_loss, ev.loss, ev.dice, snapshot(model)};
    }

    result.last = snapshot(model);
    if (config.epochs == 0) result.last = result.best.weights;
    return result;
}

void write_train_log_csv(const std::vector<EpochLog>& history,
                         const std::filesystem::path& path, const TrainConfig& config,
                         const std::string& init_provenance) {
    Report report;
    report.experiment_id = "training";
    report.seed = config.seed;
    report.echo("init", init_provenance);
    report.echo("lr", fmt_f(config.lr, 10));
    report.echo("batch_size", std::to_string(config.batch_size));
    report.echo("epochs", std::to_string(config.epochs));
    report.echo("l2_decay", fmt_f(config.l2_decay, 12));
    report.echo("lambda1", fmt_f(config.loss_weights.lambda1, 4));
    report.echo("lambda2", fmt_f(config.loss_weights.lambda2, 4));
    report.columns = {"epoch", "train_loss", "val_loss", "val_dice"};
    for (const EpochLog& row : history)
        report.rows.push_back({std::to_string(row.epoch),
                               std::isnan(row.train_loss) ? "nan" : fmt_f(row.train_loss),
                               fmt_f(row.val_loss), fmt_f(row.val_dice)});
    report.write_csv(path);
}

TrainResult train_to_dir(SegResNet& model, const std::vector<PatchRecord>& train_set,
                         const std::vector<PatchRecord>& val_set, const TrainConfig& config,
                         const std::filesystem::path& out_dir,
                         const std::string& init_provenance) {
    std::filesystem::create_directories(out_dir);
    TrainResult result = train(model, train_set, val_set, config);
    save_weights(result.best.weights, out_dir / "best.srw1");
    save_weights(result.last, out_dir / "last.srw1");
    write_train_log_csv(result.history, out_dir / "train_log.csv", config, init_provenance);
    return result;
}

TrainResult finetune(const std::filesystem::path& pretrained_path,
                     const std::vector<PatchRecord>& target_train,
                     const std::vector<PatchRecord>& target_val, const TrainConfig& config,
                     const std::optional<std::filesystem::path>& out_dir) {
    const WeightSnapshot init = load_snapshot(pretrained_path);
    if (!(init.config == config.model))
        throw FormatError("finetune: pretrained weight config does not match config.model");

    SegResNet model(config.model, config.seed);
    restore(model, init);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        save_weights(init, *out_dir / "pretrained-init.srw1");
    }

    const std::string provenance = "pretrained:" + pretrained_path.string();
    if (out_dir) return train_to_dir(model, target_train, target_val, config, *out_dir, provenance);
    return train(model, target_train, target_val, config);
}

MetricsReport evaluate_dataset(SegResNet& model, const std::vector<PatchRecord>& records,
                               int boundary_d) {
    MetricsReport report;
    const int patch = model.config().patch_size;
    std::vector<double> dices, ious, bious;
    for (const PatchRecord& rec : records) {
        if (rec.image.height != patch || rec.image.width != patch)
            throw ContractViolation("evaluate_dataset: record size incompatible with model");
        Tensor x(1, 1, patch, patch);
        std::copy(rec.image.px.begin(), rec.image.px.end(), x.data.begin());
        const Tensor probs = model.forward(x, nn::Mode::infer);
        const BinaryMask pred = binarize(probs, 0.5f);

        RecordMetrics row;
        row.id = rec.source_id + "_" + std::to_string(rec.grid_pos.first) + "_" +
                 std::to_string(rec.grid_pos.second);
        row.dice = dice_score(pred, rec.mask);
        row.iou = iou_score(pred, rec.mask);
        row.boundary_iou = boundary_iou(pred, rec.mask, boundary_d);
        dices.push_back(row.dice);
        ious.push_back(row.iou);
        bious.push_back(row.boundary_iou);
        report.rows.push_back(std::move(row));
    }
    report.dice = summarize(dices);
    report.iou = summarize(ious);
    report.boundary_iou = summarize(bious);
    return report;
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path,
                       uint64_t seed) {
    Report csv;
    csv.experiment_id = "dataset_eval";
    csv.seed = seed;
    csv.echo("n_records", std::to_string(report.rows.size()));
    csv.columns = {"id", "dice", "iou", "boundary_iou"};
    for (const RecordMetrics& row : report.rows)
        csv.rows.push_back({row.id, fmt_f(row.dice), fmt_f(row.iou), fmt_f(row.boundary_iou)});
    csv.rows.push_back({"summary_mean", fmt_f(report.dice.mean), fmt_f(report.iou.mean),
                        fmt_f(report.boundary_iou.mean)});
    csv.rows.push_back({"summary_std", fmt_f(report.dice.stddev), fmt_f(report.iou.stddev),
                        fmt_f(report.boundary_iou.stddev)});
    csv.write_csv(path);
}

// ---------------------------------------------------------------------------
// config file io
// ---------------------------------------------------------------------------

namespace {

std::vector<int> parse_int_list_cfg(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string join_int_list_cfg(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

TrainConfig train_config_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");

    TrainConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: malformed line " + std::to_string(line_no) + " '" + line +
                              "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "lr")
                cfg.lr = std::stod(val);
            else if (key == "batch_size")
                cfg.batch_size = std::stoi(val);
            else if (key == "epochs")
                cfg.epochs = std::stoi(val);
            else if (key == "l2_decay")
                cfg.l2_decay = std::stod(val);
            else if (key == "lambda1")
                cfg.loss_weights.lambda1 = std::stod(val);
            else if (key == "lambda2")
                cfg.loss_weights.lambda2 = std::stod(val);
            else if (key == "dice_smooth")
                cfg.loss_weights.dice_smooth = std::stod(val);
            else if (key == "rmsprop_alpha")
                cfg.rmsprop_alpha = std::stod(val);
            else if (key == "rmsprop_eps")
                cfg.rmsprop_eps = std::stod(val);
            else if (key == "seed")
                cfg.seed = std::stoull(val);
            else if (key == "select_best_val")
                cfg.select_best_val = (val == "true" || val == "1");
            else if (key == "augment")
                cfg.augment = (val == "true" || val == "1");
            else if (key == "aug_p_hflip")
                cfg.aug.p_hflip = std::stod(val);
            else if (key == "aug_p_rot")
                cfg.aug.p_rot = std::stod(val);
            else if (key == "aug_p_noise")
                cfg.aug.p_noise = std::stod(val);
            else if (key == "aug_noise_max")
                cfg.aug.noise_max_magnitude = std::stod(val);
            else if (key == "aug_rot_angles")
                cfg.aug.rot_angles = val.empty() ? std::vector<int>{} : parse_int_list_cfg(val);
            else if (key == "in_channels")
                cfg.model.in_channels = std::stoi(val);
            else if (key == "out_channels")
                cfg.model.out_channels = std::stoi(val);
            else if (key == "init_filters")
                cfg.model.init_filters = std::stoi(val);
            else if (key == "blocks_down")
                cfg.model.blocks_down = parse_int_list_cfg(val);
            else if (key == "blocks_up")
                cfg.model.blocks_up = val.empty() ? std::vector<int>{} : parse_int_list_cfg(val);
            else if (key == "patch_size")
                cfg.model.patch_size = std::stoi(val);
            else
                throw FormatError("config: unknown key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError("config: bad value for key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

void train_config_to_file(const TrainConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open config '" + path.string() + "' for writing");
    char buf[96];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    out << "lr=" << num(config.lr) << "\n";
    out << "batch_size=" << config.batch_size << "\n";
    out << "epochs=" << config.epochs << "\n";
    out << "l2_decay=" << num(config.l2_decay) << "\n";
    out << "lambda1=" << num(config.loss_weights.lambda1) << "\n";
    out << "lambda2=" << num(config.loss_weights.lambda2) << "\n";
    out << "dice_smooth=" << num(config.loss_weights.dice_smooth) << "\n";
    out << "rmsprop_alpha=" << num(config.rmsprop_alpha) << "\n";
    out << "rmsprop_eps=" << num(config.rmsprop_eps) << "\n";
    out << "seed=" << config.seed << "\n";
    out << "select_best_val=" << (config.select_best_val ? "true" : "false") << "\n";
    out << "augment=" << (config.augment ? "true" : "false") << "\n";
    out << "aug_p_hflip=" << num(config.aug.p_hflip) << "\n";
    out << "aug_p_rot=" << num(config.aug.p_rot) << "\n";
    out << "aug_p_noise=" << num(config.aug.p_noise) << "\n";
    out << "aug_noise_max=" << num(config.aug.noise_max_magnitude) << "\n";
    out << "aug_rot_angles=" << join_int_list_cfg(config.aug.rot_angles) << "\n";
    out << "in_channels=" << config.model.in_channels << "\n";
    out << "out_channels=" << config.model.out_channels << "\n";
    out << "init_filters=" << config.model.init_filters << "\n";
    out << "blocks_down=" << join_int_list_cfg(config.model.blocks_down) << "\n";
    out << "blocks_up=" << join_int_list_cfg(config.model.blocks_up) << "\n";
    out << "patch_size=" << config.model.patch_size << "\n";
}

}  // namespace bioseg
