#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bioseg/ops.hpp"
#include "bioseg/tensor.hpp"

namespace bioseg {

// Architecture description. Encoder level i runs at init_filters * 2^i
// channels; spatial dims halve at each level after the first.
struct ModelConfig {
    int in_channels = 1;
    int out_channels = 1;
    int init_filters = 32;
    std::vector<int> blocks_down = {1, 2, 2, 4};
    std::vector<int> blocks_up = {1, 1, 1};
    int patch_size = 224;

    void validate() const;
    int levels() const { return static_cast<int>(blocks_down.size()); }
    int downsample_factor() const { return 1 << (levels() - 1); }

    bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct ConvLayer {
    std::string name;
    TensorT<T> weight;  // [cout,cin,k,k]
    TensorT<T> bias;    // [1,cout,1,1]
    int stride = 1;
    int padding = 0;
};

template <class T>
struct BnLayer {
    std::string name;
    TensorT<T> gamma, beta;               // [1,c,1,1]
    TensorT<T> running_mean, running_var; // [1,c,1,1] buffers
};

// Pre-activation residual block: x + conv(relu(bn(conv(relu(bn(x)))))).
template <class T>
struct ResBlock {
    BnLayer<T> bn1;
    ConvLayer<T> conv1;
    BnLayer<T> bn2;
    ConvLayer<T> conv2;
};

// Residual encoder-decoder with identity skip connections, symmetric decoder
// and a sigmoid output head. Stem conv3x3 -> encoder levels (strided conv3x3
// downsampling, pre-activation residual blocks) -> decoder levels (conv1x1
// channel halving, 2x nearest upsampling, skip add, residual blocks) ->
// conv1x1 head -> sigmoid.
template <class T>
class SegResNetT {
public:
    SegResNetT(ModelConfig cfg, uint64_t seed);

    // Train mode records an op tape for backward and updates BN running
    // stats; infer mode uses running stats and is a pure function of
    // (weights, input).
    TensorT<T> forward(const TensorT<T>& input, nn::Mode mode);

    // Accumulates parameter gradients (into each parameter's grad buffer)
    // from the tape recorded by the last train-mode forward.
    void backward(const TensorT<T>& loss_grad);

    std::vector<std::pair<std::string, TensorT<T>*>> named_parameters();
    std::vector<std::pair<std::string, const TensorT<T>*>> named_parameters() const;
    std::vector<std::pair<std::string, TensorT<T>*>> named_buffers();
    std::vector<std::pair<std::string, const TensorT<T>*>> named_buffers() const;

    void zero_grad();
    size_t parameter_count() const;

    const ModelConfig& config() const { return cfg_; }
    bool bn_stats_recorded() const { return bn_warmed_; }
    void mark_bn_stats_recorded() { bn_warmed_ = true; }

private:
    struct EncoderLevel {
        bool has_down = false;
        ConvLayer<T> down;
        std::vector<ResBlock<T>> blocks;
    };
    struct DecoderLevel {
        ConvLayer<T> reduce;
        std::vector<ResBlock<T>> blocks;
    };

    struct Node {
        TensorT<T> v;
        int slot = -1;
    };

    Node run_conv(ConvLayer<T>& layer, const Node& x);
    Node run_bn(BnLayer<T>& layer, const Node& x, nn::Mode mode);
    Node run_relu(const Node& x);
    Node run_add(const Node& a, const Node& b);
    Node run_upsample(const Node& x);
    Node run_sigmoid(const Node& x);
    Node run_block(ResBlock<T>& block, const Node& x, nn::Mode mode);
    int leaf(TensorT<T>* param);

    ModelConfig cfg_;
    ConvLayer<T> stem_;
    std::vector<EncoderLevel> enc_;
    std::vector<DecoderLevel> dec_;
    ConvLayer<T> head_;

    nn::OpTape<T> tape_;
    bool taping_ = false;
    bool tape_valid_ = false;
    int out_slot_ = -1;
    std::vector<std::pair<TensorT<T>*, int>> param_slots_;
    bool bn_warmed_ = false;
    bool warned_cold_stats_ = false;
};

using SegResNet = SegResNetT<float>;

// In-memory copy of everything the weight file stores.
struct WeightSnapshot {
    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> params;
    std::vector<std::pair<std::string, Tensor>> buffers;
};

WeightSnapshot snapshot(const SegResNet& model);
void restore(SegResNet& model, const WeightSnapshot& snap);

// SRW1 container: magic "SRW1"; u32 LE config-block length; UTF-8 key=value
// lines; u32 record count; per record u16 name length, name, u8 rank,
// rank x u32 dims, f32 LE row-major values.
void save_weights(const WeightSnapshot& snap, const std::filesystem::path& path);
void save_weights(const SegResNet& model, const std::filesystem::path& path);
WeightSnapshot load_snapshot(const std::filesystem::path& path);

template <class T>
SegResNetT<T> load_weights(const std::filesystem::path& path);

std::string config_to_text(const ModelConfig& cfg);
ModelConfig config_from_text(const std::string& text);

}  // namespace bioseg
