#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bioseg/loss.hpp"
#include "bioseg/model.hpp"
#include "bioseg/optim.hpp"
#include "bioseg/patches.hpp"
#include "bioseg/report.hpp"

namespace bioseg {

struct TrainConfig {
    double lr = 1e-5;
    int batch_size = 24;
    int epochs = 400;          // 400 pretrain / 100 finetune full-scale defaults
    double l2_decay = 1e-8;
    LossWeights loss_weights;
    double rmsprop_alpha = 0.99;
    double rmsprop_eps = 1e-8;
    uint64_t seed = 0;
    bool select_best_val = true;
    bool augment = true;
    AugmentPolicy aug;
    ModelConfig model;

    void validate() const;
};

// key=value config file mirroring the fields above.
TrainConfig train_config_from_file(const std::filesystem::path& path);
void train_config_to_file(const TrainConfig& config, const std::filesystem::path& path);

struct EpochLog {
    int epoch = 0;           // 0 is the pre-training baseline (val only)
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_dice = 0.0;
};

struct Checkpoint {
    int epoch = -1;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_dice = 0.0;
    WeightSnapshot weights;
};

struct TrainResult {
    std::vector<EpochLog> history;
    Checkpoint best;   // smallest validation loss
    WeightSnapshot last;
};

// Per-epoch: seeded shuffle, mini-batches (last partial batch kept), online
// augmentation, forward/loss/backward/RMSProp step. A non-finite loss aborts
// with the epoch and batch index. The model is left at its last-epoch state.
TrainResult train(SegResNet& model, const std::vector<PatchRecord>& train_set,
                  const std::vector<PatchRecord>& val_set, const TrainConfig& config);

// train() plus artifacts: best.srw1, last.srw1 and train_log.csv in out_dir.
TrainResult train_to_dir(SegResNet& model, const std::vector<PatchRecord>& train_set,
                         const std::vector<PatchRecord>& val_set, const TrainConfig& config,
                         const std::filesystem::path& out_dir,
                         const std::string& init_provenance = "random");

// Loads pretrained weights (config in the file must match config.model),
// then trains with all parameters trainable. Also writes pretrained-init.srw1
// when out_dir is given. epochs == 0 returns the pretrained weights unchanged.
TrainResult finetune(const std::filesystem::path& pretrained_path,
                     const std::vector<PatchRecord>& target_train,
                     const std::vector<PatchRecord>& target_val, const TrainConfig& config,
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct SplitEval {
    double loss = 0.0;
    double dice = 0.0;
};

// Infer-mode combined loss and mean Dice (binarized at 0.5) over records.
SplitEval evaluate_split(SegResNet& model, const std::vector<PatchRecord>& records,
                         const LossWeights& weights, int batch_size);

struct RecordMetrics {
    std::string id;
    double dice = 0.0;
    double iou = 0.0;
    double boundary_iou = 0.0;
};

struct MetricsReport {
    std::vector<RecordMetrics> rows;
    SummaryStats dice;
    SummaryStats iou;
    SummaryStats boundary_iou;
};

// Per-record Dice/IoU/boundary-IoU of the binarized prediction vs ground
// truth, with mean/std aggregation.
MetricsReport evaluate_dataset(SegResNet& model, const std::vector<PatchRecord>& records,
                               int boundary_d = 2);

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path,
                       uint64_t seed);

void write_train_log_csv(const std::vector<EpochLog>& history,
                         const std::filesystem::path& path, const TrainConfig& config,
                         const std::string& init_provenance);

}  // namespace bioseg
