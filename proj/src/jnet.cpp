#include "jsr/jnet.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace jsr::net {

using ops::Var;

Variant variant_from_string(const std::string& s) {
    if (s == "flat-unet") return Variant::FlatUnet;
    if (s == "unet-ps") return Variant::UnetPS;
    if (s == "jnet") return Variant::JNet;
    throw InvalidParameter("unknown variant '" + s + "' (want flat-unet | unet-ps | jnet)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::FlatUnet: return "flat-unet";
        case Variant::UnetPS: return "unet-ps";
        case Variant::JNet: return "jnet";
    }
    return "?";
}

BlockType block_type_from_string(const std::string& s) {
    if (s == "naive") return BlockType::Naive;
    if (s == "baseline") return BlockType::Baseline;
    throw InvalidParameter("unknown block type '" + s + "' (want naive | baseline)");
}

std::string to_string(BlockType b) {
    return b == BlockType::Naive ? "naive" : "baseline";
}

void NetworkSpec::validate() const {
    if (width < 2 || width % 2 != 0)
        throw InvalidParameter("width must be even and >= 2, got " + std::to_string(width));
    if (blocks_per_stage < 1) throw InvalidParameter("blocks_per_stage must be >= 1");
    if (encoder_levels < 1) throw InvalidParameter("encoder_levels must be >= 1");
    if (scale != 1 && scale != 2 && scale != 4)
        throw InvalidParameter("scale must be 1, 2 or 4");
    if (variant == Variant::JNet && scale != 2)
        throw InvalidParameter("jnet variant supports scale 2 only");
    if (in_channels != 1 && in_channels != 3)
        throw InvalidParameter("in_channels must be 1 or 3");
    if (out_channels != 1 && out_channels != 3)
        throw InvalidParameter("out_channels must be 1 or 3");
}

std::string NetworkSpec::to_json() const {
    nlohmann::json j;
    j["variant"] = to_string(variant);
    j["block_type"] = to_string(block_type);
    j["width"] = width;
    j["blocks_per_stage"] = blocks_per_stage;
    j["encoder_levels"] = encoder_levels;
    j["scale"] = scale;
    j["in_channels"] = in_channels;
    j["out_channels"] = out_channels;
    j["encoder_down"] = encoder_down == EncoderDown::MaxPool ? "maxpool" : "stride2";
    j["global_residual"] = global_residual;
    return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    NetworkSpec s;
    s.variant = variant_from_string(j.at("variant").get<std::string>());
    s.block_type = block_type_from_string(j.at("block_type").get<std::string>());
    s.width = j.at("width").get<int64_t>();
    s.blocks_per_stage = j.at("blocks_per_stage").get<int64_t>();
    s.encoder_levels = j.at("encoder_levels").get<int64_t>();
    s.scale = j.at("scale").get<int64_t>();
    s.in_channels = j.at("in_channels").get<int64_t>();
    s.out_channels = j.at("out_channels").get<int64_t>();
    const auto down = j.value("encoder_down", std::string("stride2"));
    s.encoder_down = down == "maxpool" ? EncoderDown::MaxPool : EncoderDown::StridedConv;
    s.global_residual = j.value("global_residual", false);
    s.validate();
    return s;
}

Tensor& NetworkParams::at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw InvalidParameter("no parameter named " + name);
    return named[it->second].second;
}

const Tensor& NetworkParams::at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw InvalidParameter("no parameter named " + name);
    return named[it->second].second;
}

int64_t NetworkParams::total_size() const {
    int64_t n = 0;
    for (const auto& [name, t] : named) n += t.size();
    return n;
}

namespace {

/// Hands out parameter tensors by name. In Create mode it initializes and
/// records them; in Use mode it fetches from an existing NetworkParams and
/// checks shapes, wrapping each as a graph leaf.
class ParamBank {
public:
    ParamBank(SeededRng& rng) : mode_(Mode::Create), rng_(&rng) {}
    ParamBank(const NetworkParams& params, bool train, std::vector<Var>* leaves)
        : mode_(Mode::Use), params_(&params), train_(train), leaves_out_(leaves) {
        if (leaves_out_) leaves_out_->assign(params.named.size(), nullptr);
    }

    Var conv(const std::string& name, int64_t co, int64_t ci, int64_t kh, int64_t kw) {
        const int64_t fan_in = ci * kh * kw;
        return get(name, {co, ci, kh, kw}, std::sqrt(2.0 / static_cast<double>(fan_in)));
    }

    Var matrix(const std::string& name, int64_t r, int64_t c) {
        return get(name, {r, c}, std::sqrt(2.0 / static_cast<double>(c)));
    }

    Var vec(const std::string& name, int64_t n, double fill) {
        return get(name, {n}, 0.0, fill);
    }

    NetworkParams take() { return std::move(created_); }

private:
    enum class Mode { Create, Use };

    Var get(const std::string& name, std::vector<int64_t> dims, double std, double fill = 0.0) {
        if (mode_ == Mode::Create) {
            Tensor t(dims, fill);
            if (std > 0.0)
                for (auto& v : t.vec()) v = std * rng_->gaussian();
            created_.index[name] = created_.named.size();
            created_.named.emplace_back(name, t);
            return ops::leaf(std::move(t), false);
        }
        auto it = params_->index.find(name);
        if (it == params_->index.end())
            throw InvalidParameter("missing parameter " + name + " (spec/params mismatch)");
        const Tensor& t = params_->named[it->second].second;
        if (t.dims() != dims)
            throw InvalidParameter("parameter " + name + " has shape " + t.shape_str() +
                                   ", expected " + Tensor::shape_str(dims));
        Var v = ops::leaf(t, train_);
        if (leaves_out_) (*leaves_out_)[it->second] = v;
        return v;
    }

    Mode mode_;
    SeededRng* rng_ = nullptr;
    const NetworkParams* params_ = nullptr;
    bool train_ = false;
    std::vector<Var>* leaves_out_ = nullptr;
    NetworkParams created_;
};

Var baseline_block(const Var& x, int64_t w, const std::string& prefix, ParamBank& bank) {
    Var y = ops::layer_norm(x, bank.vec(prefix + ".ln1.gain", w, 1.0),
                            bank.vec(prefix + ".ln1.bias", w, 0.0));
    y = ops::conv2d(y, bank.conv(prefix + ".conv1.w", 2 * w, w, 1, 1),
                    bank.vec(prefix + ".conv1.b", 2 * w, 0.0), 1, 0);
    y = ops::conv2d(y, bank.conv(prefix + ".dwconv.w", 2 * w, 1, 3, 3),
                    bank.vec(prefix + ".dwconv.b", 2 * w, 0.0), 1, 1, 2 * w);
    y = ops::simple_gate(y);
    y = ops::sca(y, bank.matrix(prefix + ".sca.w", w, w), bank.vec(prefix + ".sca.b", w, 0.0));
    y = ops::conv2d(y, bank.conv(prefix + ".conv2.w", w, w, 1, 1),
                    bank.vec(prefix + ".conv2.b", w, 0.0), 1, 0);
    Var mid = ops::add(x, y);

    Var z = ops::layer_norm(mid, bank.vec(prefix + ".ln2.gain", w, 1.0),
                            bank.vec(prefix + ".ln2.bias", w, 0.0));
    z = ops::conv2d(z, bank.conv(prefix + ".conv3.w", 2 * w, w, 1, 1),
                    bank.vec(prefix + ".conv3.b", 2 * w, 0.0), 1, 0);
    z = ops::simple_gate(z);
    z = ops::conv2d(z, bank.conv(prefix + ".conv4.w", w, w, 1, 1),
                    bank.vec(prefix + ".conv4.b", w, 0.0), 1, 0);
    return ops::add(mid, z);
}

Var naive_block(const Var& x, int64_t w, const std::string& prefix, ParamBank& bank) {
    Var y = ops::conv2d(x, bank.conv(prefix + ".conv.w", w, w, 3, 3),
                        bank.vec(prefix + ".conv.b", w, 0.0), 1, 1);
    return ops::relu(y);
}

Var block_stack(Var x, const NetworkSpec& spec, const std::string& prefix, ParamBank& bank) {
    for (int64_t i = 0; i < spec.blocks_per_stage; ++i) {
        const std::string p = prefix + ".block" + std::to_string(i);
        x = spec.block_type == BlockType::Baseline ? baseline_block(x, spec.width, p, bank)
                                                   : naive_block(x, spec.width, p, bank);
    }
    return x;
}

Var upsample2x(const Var& x, int64_t w, const std::string& prefix, ParamBank& bank) {
    Var y = ops::conv2d(x, bank.conv(prefix + ".w", 4 * w, w, 1, 1),
                        bank.vec(prefix + ".b", 4 * w, 0.0), 1, 0);
    return ops::pixel_shuffle(y, 2);
}

/// Nearest-neighbor upsampling of the input batch for the optional global
/// residual; constant w.r.t. parameters, so it enters the graph as a leaf.
Tensor replicate_upsample(const Tensor& x, int64_t s) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, H * s, W * s});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t h = 0; h < H * s; ++h)
                for (int64_t w = 0; w < W * s; ++w)
                    y.at4(n, c, h, w) = x.at4(n, c, h / s, w / s);
    return y;
}

Var build_graph(const NetworkSpec& spec, const Tensor& input, ParamBank& bank) {
    const int64_t w = spec.width;
    const int64_t L = spec.encoder_levels;
    Var x = ops::leaf(input, false);

    Var h = ops::conv2d(x, bank.conv("stem.w", w, spec.in_channels, 3, 3),
                        bank.vec("stem.b", w, 0.0), 1, 1);

    Var body;
    if (spec.variant == Variant::FlatUnet) {
        body = h;
        const int64_t total = spec.blocks_per_stage * (2 * L + 1);
        for (int64_t i = 0; i < total; ++i) {
            const std::string p = "flat.block" + std::to_string(i);
            body = spec.block_type == BlockType::Baseline ? baseline_block(body, w, p, bank)
                                                          : naive_block(body, w, p, bank);
        }
    } else {
        std::vector<Var> skips;
        Var cur = h;
        for (int64_t l = 0; l < L; ++l) {
            cur = block_stack(cur, spec, "enc" + std::to_string(l), bank);
            skips.push_back(cur);
            if (spec.encoder_down == EncoderDown::StridedConv) {
                cur = ops::conv2d(cur, bank.conv("down" + std::to_string(l) + ".w", w, w, 2, 2),
                                  bank.vec("down" + std::to_string(l) + ".b", w, 0.0), 2, 0);
            } else {
                cur = ops::max_pool2x2(cur);
            }
        }
        cur = block_stack(cur, spec, "bottom", bank);
        for (int64_t l = L - 1; l >= 0; --l) {
            cur = upsample2x(cur, w, "up" + std::to_string(l), bank);
            cur = ops::concat_channels(cur, skips[static_cast<size_t>(l)]);
            cur = ops::conv2d(cur, bank.conv("fuse" + std::to_string(l) + ".w", w, 2 * w, 1, 1),
                              bank.vec("fuse" + std::to_string(l) + ".b", w, 0.0), 1, 0);
            cur = block_stack(cur, spec, "dec" + std::to_string(l), bank);
        }
        body = cur;
    }

    Var out;
    if (spec.variant == Variant::JNet) {
        // the extra expansive path: no encoder counterpart, so no skip
        Var e = upsample2x(body, w, "extra.up", bank);
        e = block_stack(e, spec, "extra", bank);
        out = ops::conv2d(e, bank.conv("head.w", spec.out_channels, w, 3, 3),
                          bank.vec("head.b", spec.out_channels, 0.0), 1, 1);
    } else {
        const int64_t ps_ch = spec.out_channels * spec.scale * spec.scale;
        Var e = ops::conv2d(body, bank.conv("head.w", ps_ch, w, 3, 3),
                            bank.vec("head.b", ps_ch, 0.0), 1, 1);
        out = ops::pixel_shuffle(e, spec.scale);
    }

    if (spec.global_residual) {
        out = ops::add(out, ops::leaf(replicate_upsample(input, spec.scale), false));
    }
    return out;
}

}  // namespace

NetworkParams make_baseline_block_params(int64_t width, SeededRng& rng) {
    ParamBank bank(rng);
    Tensor dummy({1, width, 4, 4});
    baseline_block(ops::leaf(dummy, false), width, "blk", bank);
    return bank.take();
}

ops::Var baseline_block_forward(const NetworkParams& params, const Tensor& x, bool train,
                                std::vector<ops::Var>* param_leaves) {
    if (x.ndim() != 4) throw InvalidParameter("baseline block expects (N,C,H,W)");
    const int64_t w = x.dim(1);
    if (params.index.count("blk.ln1.gain") == 0 || params.at("blk.ln1.gain").size() != w)
        throw InvalidParameter("block params do not match input width " + std::to_string(w));
    ParamBank bank(params, train, param_leaves);
    return baseline_block(ops::leaf(x, false), w, "blk", bank);
}

NetworkParams build_network(const NetworkSpec& spec, SeededRng& rng) {
    spec.validate();
    ParamBank bank(rng);
    const int64_t d = spec.divisibility();
    Tensor dummy({1, spec.in_channels, d, d});
    build_graph(spec, dummy, bank);
    return bank.take();
}

ops::Var forward_graph(const NetworkParams& params, const NetworkSpec& spec,
                       const Tensor& lr_batch, bool train, std::vector<ops::Var>* param_leaves) {
    spec.validate();
    if (lr_batch.ndim() != 4)
        throw InvalidParameter("forward expects an (N,C,H,W) batch");
    if (lr_batch.dim(1) != spec.in_channels)
        throw InvalidParameter("input has " + std::to_string(lr_batch.dim(1)) +
                               " channels, spec wants " + std::to_string(spec.in_channels));
    const int64_t d = spec.divisibility();
    if (lr_batch.dim(2) % d != 0 || lr_batch.dim(3) % d != 0)
        throw InvalidParameter("input dims " + lr_batch.shape_str() +
                               " not divisible by 2^encoder_levels = " + std::to_string(d));
    ParamBank bank(params, train, param_leaves);
    return build_graph(spec, lr_batch, bank);
}

Tensor forward(const NetworkParams& params, const NetworkSpec& spec, const Tensor& lr_batch) {
    return forward_graph(params, spec, lr_batch, false)->value;
}

namespace {

int64_t conv_count(int64_t co, int64_t ci, int64_t kh, int64_t kw) {
    return co * ci * kh * kw + co;  // + bias
}

int64_t block_count(const NetworkSpec& spec) {
    const int64_t w = spec.width;
    if (spec.block_type == BlockType::Naive) return conv_count(w, w, 3, 3);
    int64_t n = 0;
    n += 2 * w;                      // ln1
    n += conv_count(2 * w, w, 1, 1); // expand
    n += conv_count(2 * w, 1, 3, 3); // depthwise
    n += w * w + w;                  // sca
    n += conv_count(w, w, 1, 1);     // project
    n += 2 * w;                      // ln2
    n += conv_count(2 * w, w, 1, 1);
    n += conv_count(w, w, 1, 1);
    return n;
}

}  // namespace

int64_t count_params(const NetworkSpec& spec) {
    spec.validate();
    const int64_t w = spec.width, L = spec.encoder_levels, B = spec.blocks_per_stage;
    const int64_t blk = block_count(spec);
    int64_t n = conv_count(w, spec.in_channels, 3, 3);  // stem
    if (spec.variant == Variant::FlatUnet) {
        n += B * (2 * L + 1) * blk;
        n += conv_count(spec.out_channels * spec.scale * spec.scale, w, 3, 3);
        return n;
    }
    n += B * (L + 1) * blk;  // encoder stages + bottom
    if (spec.encoder_down == EncoderDown::StridedConv) n += L * conv_count(w, w, 2, 2);
    n += L * (conv_count(4 * w, w, 1, 1) + conv_count(w, 2 * w, 1, 1) + B * blk);  // decoder
    if (spec.variant == Variant::JNet) {
        n += conv_count(4 * w, w, 1, 1) + B * blk;  // extra expansive path
        n += conv_count(spec.out_channels, w, 3, 3);
    } else {
        n += conv_count(spec.out_channels * spec.scale * spec.scale, w, 3, 3);
    }
    return n;
}

}  // namespace jsr::net
