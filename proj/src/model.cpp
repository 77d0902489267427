#include "bioseg/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "bioseg/rng.hpp"

namespace bioseg {

void ModelConfig::validate() const {
    if (in_channels < 1) throw ContractViolation("ModelConfig: in_channels >= 1 violated");
    if (out_channels < 1) throw ContractViolation("ModelConfig: out_channels >= 1 violated");
    if (init_filters < 1) throw ContractViolation("ModelConfig: init_filters >= 1 violated");
    if (blocks_down.empty()) throw ContractViolation("ModelConfig: blocks_down must be non-empty");
    if (blocks_up.size() != blocks_down.size() - 1)
        throw ContractViolation("ModelConfig: len(blocks_up) = len(blocks_down) - 1 violated");
    for (int b : blocks_down)
        if (b < 1) throw ContractViolation("ModelConfig: blocks_down entries >= 1 violated");
    for (int b : blocks_up)
        if (b < 1) throw ContractViolation("ModelConfig: blocks_up entries >= 1 violated");
    if (patch_size < 1) throw ContractViolation("ModelConfig: patch_size >= 1 violated");
    if (patch_size % downsample_factor() != 0)
        throw ContractViolation(
            "ModelConfig: patch_size divisible by 2^(len(blocks_down)-1) violated");
}

namespace {

template <class T>
void init_conv(ConvLayer<T>& layer, std::string name, int cin, int cout, int k, int stride,
               int padding, Rng& rng) {
    layer.name = std::move(name);
    layer.weight = TensorT<T>(cout, cin, k, k);
    layer.bias = TensorT<T>(1, cout, 1, 1);
    layer.stride = stride;
    layer.padding = padding;
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (auto& v : layer.weight.data) v = static_cast<T>(rng.normal() * stddev);
}

template <class T>
void init_bn(BnLayer<T>& layer, std::string name, int c) {
    layer.name = std::move(name);
    layer.gamma = TensorT<T>(1, c, 1, 1);
    layer.beta = TensorT<T>(1, c, 1, 1);
    layer.running_mean = TensorT<T>(1, c, 1, 1);
    layer.running_var = TensorT<T>(1, c, 1, 1);
    for (auto& v : layer.gamma.data) v = T(1);
    for (auto& v : layer.running_var.data) v = T(1);
}

template <class T>
void init_block(ResBlock<T>& block, const std::string& prefix, int c, Rng& rng) {
    init_bn(block.bn1, prefix + ".bn1", c);
    init_conv(block.conv1, prefix + ".conv1", c, c, 3, 1, 1, rng);
    init_bn(block.bn2, prefix + ".bn2", c);
    init_conv(block.conv2, prefix + ".conv2", c, c, 3, 1, 1, rng);
}

}  // namespace

template <class T>
SegResNetT<T>::SegResNetT(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);

    const int levels = cfg_.levels();
    init_conv(stem_, "stem", cfg_.in_channels, cfg_.init_filters, 3, 1, 1, rng);

    enc_.resize(static_cast<size_t>(levels));
    for (int i = 0; i < levels; ++i) {
        const int ch = cfg_.init_filters << i;
        EncoderLevel& level = enc_[static_cast<size_t>(i)];
        if (i > 0) {
            level.has_down = true;
            init_conv(level.down, "enc" + std::to_string(i) + ".down", ch / 2, ch, 3, 2, 1, rng);
        }
        level.blocks.resize(static_cast<size_t>(cfg_.blocks_down[static_cast<size_t>(i)]));
        for (size_t b = 0; b < level.blocks.size(); ++b)
            init_block(level.blocks[b],
                       "enc" + std::to_string(i) + ".block" + std::to_string(b), ch, rng);
    }

    dec_.resize(cfg_.blocks_up.size());
    for (size_t j = 0; j < dec_.size(); ++j) {
        const int ch_in = cfg_.init_filters << (levels - 1 - static_cast<int>(j));
        const int ch_out = ch_in / 2;
        DecoderLevel& level = dec_[j];
        init_conv(level.reduce, "dec" + std::to_string(j) + ".reduce", ch_in, ch_out, 1, 1, 0,
                  rng);
        level.blocks.resize(static_cast<size_t>(cfg_.blocks_up[j]));
        for (size_t b = 0; b < level.blocks.size(); ++b)
            init_block(level.blocks[b], "dec" + std::to_string(j) + ".block" + std::to_string(b),
                       ch_out, rng);
    }

    init_conv(head_, "head", cfg_.init_filters, cfg_.out_channels, 1, 1, 0, rng);
}

template <class T>
int SegResNetT<T>::leaf(TensorT<T>* param) {
    const int slot = tape_.push_leaf(*param);
    param_slots_.emplace_back(param, slot);
    return slot;
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_conv(ConvLayer<T>& layer, const Node& x) {
    if (!taping_) {
        return Node{nn::conv2d(x.v, layer.weight, layer.bias, layer.stride, layer.padding),
                    -1};
    }
    auto ctx = std::make_shared<nn::Conv2dCtx<T>>();
    TensorT<T> out = nn::conv2d(x.v, layer.weight, layer.bias, layer.stride, layer.padding,
                                ctx.get());
    const int ws = leaf(&layer.weight);
    const int bs = leaf(&layer.bias);
    const int slot = tape_.record(
        layer.name, {x.slot, ws, bs}, out, [ctx](const TensorT<T>& g) {
            nn::Conv2dGrads<T> grads = nn::conv2d_backward(*ctx, g);
            std::vector<TensorT<T>> out_grads;
            out_grads.push_back(std::move(grads.input));
            out_grads.push_back(std::move(grads.weight));
            out_grads.push_back(std::move(grads.bias));
            return out_grads;
        });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_bn(BnLayer<T>& layer, const Node& x,
                                                   nn::Mode mode) {
    constexpr T momentum = T(0.1);
    constexpr T eps = T(1e-5);
    if (mode == nn::Mode::infer && !bn_warmed_ && !warned_cold_stats_) {
        std::fprintf(stderr,
                     "[bioseg] note: infer-mode forward with initialized batchnorm stats "
                     "(mean 0, var 1); no training statistics recorded yet\n");
        warned_cold_stats_ = true;
    }
    if (!taping_ || mode == nn::Mode::infer) {
        return Node{nn::batchnorm2d(x.v, layer.gamma, layer.beta, layer.running_mean,
                                    layer.running_var, mode, momentum, eps),
                    -1};
    }
    auto ctx = std::make_shared<nn::BatchNormCtx<T>>();
    TensorT<T> out = nn::batchnorm2d(x.v, layer.gamma, layer.beta, layer.running_mean,
                                     layer.running_var, mode, momentum, eps, ctx.get());
    const int gs = leaf(&layer.gamma);
    const int bs = leaf(&layer.beta);
    const int slot = tape_.record(
        layer.name, {x.slot, gs, bs}, out, [ctx](const TensorT<T>& g) {
            nn::BatchNormGrads<T> grads = nn::batchnorm2d_backward(*ctx, g);
            std::vector<TensorT<T>> out_grads;
            out_grads.push_back(std::move(grads.input));
            out_grads.push_back(std::move(grads.gamma));
            out_grads.push_back(std::move(grads.beta));
            return out_grads;
        });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_relu(const Node& x) {
    if (!taping_) return Node{nn::relu(x.v), -1};
    auto ctx = std::make_shared<nn::ReluCtx<T>>();
    TensorT<T> out = nn::relu(x.v, ctx.get());
    const int slot = tape_.record("relu", {x.slot}, out, [ctx](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{nn::relu_backward(*ctx, g)};
    });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_add(const Node& a, const Node& b) {
    TensorT<T> out = nn::add_residual(a.v, b.v);
    if (!taping_) return Node{std::move(out), -1};
    const int slot = tape_.record("add", {a.slot, b.slot}, out, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{g, g};
    });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_upsample(const Node& x) {
    TensorT<T> out = nn::upsample2x(x.v);
    if (!taping_) return Node{std::move(out), -1};
    const int slot = tape_.record("upsample2x", {x.slot}, out, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{nn::upsample2x_backward(g)};
    });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_sigmoid(const Node& x) {
    if (!taping_) return Node{nn::sigmoid(x.v), -1};
    auto ctx = std::make_shared<nn::SigmoidCtx<T>>();
    TensorT<T> out = nn::sigmoid(x.v, ctx.get());
    const int slot = tape_.record("sigmoid", {x.slot}, out, [ctx](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{nn::sigmoid_backward(*ctx, g)};
    });
    return Node{std::move(out), slot};
}

template <class T>
typename SegResNetT<T>::Node SegResNetT<T>::run_block(ResBlock<T>& block, const Node& x,
                                                      nn::Mode mode) {
    Node a = run_bn(block.bn1, x, mode);
    a = run_relu(a);
    a = run_conv(block.conv1, a);
    a = run_bn(block.bn2, a, mode);
    a = run_relu(a);
    a = run_conv(block.conv2, a);
    return run_add(a, x);
}

template <class T>
TensorT<T> SegResNetT<T>::forward(const TensorT<T>& input, nn::Mode mode) {
    if (input.n() < 1 || input.c() != cfg_.in_channels)
        throw ContractViolation("forward: input batch/channel shape mismatch");
    if (input.h() != cfg_.patch_size || input.w() != cfg_.patch_size)
        throw ContractViolation("forward: input spatial size must equal config patch_size");

    taping_ = (mode == nn::Mode::train);
    tape_.clear();
    param_slots_.clear();
    tape_valid_ = false;
    out_slot_ = -1;

    Node x;
    if (taping_) {
        x = Node{input, tape_.push_leaf(input)};
    } else {
        x = Node{input, -1};
    }

    x = run_conv(stem_, x);

    std::vector<Node> enc_out;
    enc_out.reserve(enc_.size());
    for (size_t i = 0; i < enc_.size(); ++i) {
        if (enc_[i].has_down) x = run_conv(enc_[i].down, x);
        for (ResBlock<T>& block : enc_[i].blocks) x = run_block(block, x, mode);
        enc_out.push_back(x);
    }

    for (size_t j = 0; j < dec_.size(); ++j) {
        x = run_conv(dec_[j].reduce, x);
        x = run_upsample(x);
        x = run_add(x, enc_out[enc_.size() - 2 - j]);
        for (ResBlock<T>& block : dec_[j].blocks) x = run_block(block, x, mode);
    }

    x = run_conv(head_, x);
    x = run_sigmoid(x);

    if (taping_) {
        out_slot_ = x.slot;
        tape_valid_ = true;
        bn_warmed_ = true;
    }
    taping_ = false;
    return x.v;
}

template <class T>
void SegResNetT<T>::backward(const TensorT<T>& loss_grad) {
    if (!tape_valid_) throw ContractViolation("backward: no train-mode forward tape");
    tape_.backward(out_slot_, loss_grad);
    for (auto& [param, slot] : param_slots_) {
        const TensorT<T>& g = tape_.grad(slot);
        param->ensure_grad();
        if (g.data.empty()) continue;
        for (size_t i = 0; i < param->grad.size(); ++i) param->grad[i] += g.data[i];
    }
}

template <class T>
std::vector<std::pair<std::string, TensorT<T>*>> SegResNetT<T>::named_parameters() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    auto add_conv = [&out](ConvLayer<T>& l) {
        out.emplace_back(l.name + ".weight", &l.weight);
        out.emplace_back(l.name + ".bias", &l.bias);
    };
    auto add_bn = [&out](BnLayer<T>& l) {
        out.emplace_back(l.name + ".gamma", &l.gamma);
        out.emplace_back(l.name + ".beta", &l.beta);
    };
    auto add_block = [&](ResBlock<T>& b) {
        add_bn(b.bn1);
        add_conv(b.conv1);
        add_bn(b.bn2);
        add_conv(b.conv2);
    };
    add_conv(stem_);
    for (EncoderLevel& level : enc_) {
        if (level.has_down) add_conv(level.down);
        for (ResBlock<T>& b : level.blocks) add_block(b);
    }
    for (DecoderLevel& level : dec_) {
        add_conv(level.reduce);
        for (ResBlock<T>& b : level.blocks) add_block(b);
    }
    add_conv(head_);
    return out;
}

template <class T>
std::vector<std::pair<std::string, const TensorT<T>*>> SegResNetT<T>::named_parameters() const {
    auto mutable_view = const_cast<SegResNetT<T>*>(this)->named_parameters();
    std::vector<std::pair<std::string, const TensorT<T>*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, p] : mutable_view) out.emplace_back(name, p);
    return out;
}

template <class T>
std::vector<std::pair<std::string, TensorT<T>*>> SegResNetT<T>::named_buffers() {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    auto add_bn = [&out](BnLayer<T>& l) {
        out.emplace_back(l.name + ".running_mean", &l.running_mean);
        out.emplace_back(l.name + ".running_var", &l.running_var);
    };
    auto add_block = [&](ResBlock<T>& b) {
        add_bn(b.bn1);
        add_bn(b.bn2);
    };
    for (EncoderLevel& level : enc_)
        for (ResBlock<T>& b : level.blocks) add_block(b);
    for (DecoderLevel& level : dec_)
        for (ResBlock<T>& b : level.blocks) add_block(b);
    return out;
}

template <class T>
std::vector<std::pair<std::string, const TensorT<T>*>> SegResNetT<T>::named_buffers() const {
    auto mutable_view = const_cast<SegResNetT<T>*>(this)->named_buffers();
    std::vector<std::pair<std::string, const TensorT<T>*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, p] : mutable_view) out.emplace_back(name, p);
    return out;
}

template <class T>
void SegResNetT<T>::zero_grad() {
    for (auto& [name, p] : named_parameters()) {
        (void)name;
        p->ensure_grad();
        p->zero_grad();
    }
}

template <class T>
size_t SegResNetT<T>::parameter_count() const {
    size_t count = 0;
    for (const auto& [name, p] : named_parameters()) {
        (void)name;
        count += p->size();
    }
    return count;
}

// ---------------------------------------------------------------------------
// SRW1 serialization
// ---------------------------------------------------------------------------

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw FormatError("SRW1: empty entry in integer list '" + s + "'");
        out.push_back(std::stoi(item));
    }
    return out;
}

void write_u16(std::string& buf, uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void write_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void write_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u32(buf, bits);
}

struct Reader {
    const std::string& bytes;
    size_t pos = 0;

    void need(size_t n, const std::string& what) const {
        if (pos + n > bytes.size())
            throw FormatError("SRW1: truncated " + what + " at byte " + std::to_string(pos));
    }
    uint8_t u8(const std::string& what) {
        need(1, what);
        return static_cast<uint8_t>(bytes[pos++]);
    }
    uint16_t u16(const std::string& what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(bytes[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(bytes[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const std::string& what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    float f32(const std::string& what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str(size_t n, const std::string& what) {
        need(n, what);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

// Per-channel vectors are stored rank-1; everything else rank-4.
bool is_channel_vector(const Tensor& t) {
    return t.n() == 1 && t.h() == 1 && t.w() == 1;
}

void append_record(std::string& buf, const std::string& name, const Tensor& t) {
    if (name.size() > 0xFFFF) throw ContractViolation("SRW1: record name too long");
    write_u16(buf, static_cast<uint16_t>(name.size()));
    buf += name;
    if (is_channel_vector(t)) {
        buf.push_back(static_cast<char>(1));
        write_u32(buf, static_cast<uint32_t>(t.c()));
    } else {
        buf.push_back(static_cast<char>(4));
        for (int d : t.shape) write_u32(buf, static_cast<uint32_t>(d));
    }
    for (float v : t.data) write_f32(buf, v);
}

}  // namespace

std::string config_to_text(const ModelConfig& cfg) {
    std::string out;
    out += "in_channels=" + std::to_string(cfg.in_channels) + "\n";
    out += "out_channels=" + std::to_string(cfg.out_channels) + "\n";
    out += "init_filters=" + std::to_string(cfg.init_filters) + "\n";
    out += "blocks_down=" + join_ints(cfg.blocks_down) + "\n";
    out += "blocks_up=" + join_ints(cfg.blocks_up) + "\n";
    out += "patch_size=" + std::to_string(cfg.patch_size) + "\n";
    return out;
}

ModelConfig config_from_text(const std::string& text) {
    ModelConfig cfg;
    cfg.blocks_down.clear();
    cfg.blocks_up.clear();
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("SRW1: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "in_channels")
                cfg.in_channels = std::stoi(val);
            else if (key == "out_channels")
                cfg.out_channels = std::stoi(val);
            else if (key == "init_filters")
                cfg.init_filters = std::stoi(val);
            else if (key == "blocks_down")
                cfg.blocks_down = parse_int_list(val);
            else if (key == "blocks_up")
                cfg.blocks_up = val.empty() ? std::vector<int>{} : parse_int_list(val);
            else if (key == "patch_size")
                cfg.patch_size = std::stoi(val);
            else
                throw FormatError("SRW1: unknown config key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError("SRW1: bad value for config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

WeightSnapshot snapshot(const SegResNet& model) {
    WeightSnapshot snap;
    snap.config = model.config();
    for (const auto& [name, p] : model.named_parameters()) snap.params.emplace_back(name, *p);
    for (const auto& [name, p] : model.named_buffers()) snap.buffers.emplace_back(name, *p);
    for (auto& [name, t] : snap.params) t.grad.clear();
    return snap;
}

void restore(SegResNet& model, const WeightSnapshot& snap) {
    if (!(model.config() == snap.config))
        throw ContractViolation("restore: snapshot config does not match model config");
    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    if (params.size() != snap.params.size() || buffers.size() != snap.buffers.size())
        throw ContractViolation("restore: snapshot record count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].first != snap.params[i].first)
            throw ContractViolation("restore: parameter order mismatch at " + params[i].first);
        params[i].second->data = snap.params[i].second.data;
    }
    for (size_t i = 0; i < buffers.size(); ++i) {
        if (buffers[i].first != snap.buffers[i].first)
            throw ContractViolation("restore: buffer order mismatch at " + buffers[i].first);
        buffers[i].second->data = snap.buffers[i].second.data;
    }
    model.mark_bn_stats_recorded();
}

void save_weights(const WeightSnapshot& snap, const std::filesystem::path& path) {
    std::string buf = "SRW1";
    const std::string cfg_text = config_to_text(snap.config);
    write_u32(buf, static_cast<uint32_t>(cfg_text.size()));
    buf += cfg_text;
    write_u32(buf, static_cast<uint32_t>(snap.params.size() + snap.buffers.size()));
    for (const auto& [name, t] : snap.params) append_record(buf, name, t);
    for (const auto& [name, t] : snap.buffers) append_record(buf, name, t);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

void save_weights(const SegResNet& model, const std::filesystem::path& path) {
    save_weights(snapshot(model), path);
}

WeightSnapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{bytes};
    if (r.str(4, "magic") != "SRW1") throw FormatError("SRW1: bad magic");
    const uint32_t cfg_len = r.u32("config length");
    const std::string cfg_text = r.str(cfg_len, "config block");

    WeightSnapshot snap;
    snap.config = config_from_text(cfg_text);

    const uint32_t n_records = r.u32("record count");

    // expected layout from a freshly built model
    SegResNet reference(snap.config, 0);
    auto params = reference.named_parameters();
    auto buffers = reference.named_buffers();
    if (n_records != params.size() + buffers.size())
        throw FormatError("SRW1: record count " + std::to_string(n_records) + " does not match config (expected " +
                          std::to_string(params.size() + buffers.size()) + ")");

    auto read_record = [&r](const std::string& expected_name, const Tensor& shape_like) {
        const uint16_t name_len = r.u16("record name length");
        const std::string name = r.str(name_len, "record name");
        if (name != expected_name)
            throw FormatError("SRW1: unexpected record '" + name + "' (expected '" +
                              expected_name + "')");
        const uint8_t rank = r.u8("rank of '" + name + "'");
        std::array<int, 4> dims{1, 1, 1, 1};
        if (rank == 1) {
            dims[1] = static_cast<int>(r.u32("dims of '" + name + "'"));
        } else if (rank == 4) {
            for (int i = 0; i < 4; ++i)
                dims[static_cast<size_t>(i)] = static_cast<int>(r.u32("dims of '" + name + "'"));
        } else {
            throw FormatError("SRW1: unsupported rank for record '" + name + "'");
        }
        if (dims != shape_like.shape)
            throw FormatError("SRW1: shape mismatch with config for record '" + name + "'");
        Tensor t(dims[0], dims[1], dims[2], dims[3]);
        for (auto& v : t.data) v = r.f32("values of '" + name + "'");
        return t;
    };

    for (const auto& [name, p] : params) snap.params.emplace_back(name, read_record(name, *p));
    for (const auto& [name, p] : buffers) snap.buffers.emplace_back(name, read_record(name, *p));

    if (r.pos != bytes.size())
        throw FormatError("SRW1: trailing bytes after last record at byte " +
                          std::to_string(r.pos));
    return snap;
}

template <class T>
SegResNetT<T> load_weights(const std::filesystem::path& path) {
    const WeightSnapshot snap = load_snapshot(path);
    SegResNetT<T> model(snap.config, 0);
    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    for (size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& dst = *params[i].second;
        const Tensor& src = snap.params[i].second;
        for (size_t k = 0; k < dst.data.size(); ++k) dst.data[k] = static_cast<T>(src.data[k]);
    }
    for (size_t i = 0; i < buffers.size(); ++i) {
        TensorT<T>& dst = *buffers[i].second;
        const Tensor& src = snap.buffers[i].second;
        for (size_t k = 0; k < dst.data.size(); ++k) dst.data[k] = static_cast<T>(src.data[k]);
    }
    model.mark_bn_stats_recorded();
    return model;
}

template class SegResNetT<float>;
template class SegResNetT<double>;
template SegResNetT<float> load_weights<float>(const std::filesystem::path&);
template SegResNetT<double> load_weights<double>(const std::filesystem::path&);

}  // namespace bioseg
