#include "jsr/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace jsr::cfg {

using nlohmann::json;

RunConfig::RunConfig() {
    // desk-scale preset
    network.width = 32;
    network.encoder_levels = 2;
    training.total_iters = 5000;
    training.batch = 8;
    training.seed = seed;
}

void RunConfig::validate() const {
    degradation.validate();
    network.validate();
    training.validate();
    if (network.scale != degradation.scale)
        throw InvalidParameter("network.scale and degradation.scale must agree");
    if (training.patch_size % (network.divisibility() * network.scale) != 0)
        throw InvalidParameter("patch_size must be divisible by scale * 2^encoder_levels");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (known.find(key) == known.end())
            throw InvalidParameter("unknown config key '" + key + "' in " + where);
}

void parse_degradation(const json& j, deg::DegradationConfig& d) {
    reject_unknown(j, {"scale", "alpha", "beta", "noise_max", "downsampler"}, "degradation");
    d.scale = j.value("scale", d.scale);
    d.alpha = j.value("alpha", d.alpha);
    d.beta = j.value("beta", d.beta);
    d.noise_max = j.value("noise_max", d.noise_max);
    if (j.contains("downsampler")) {
        const auto s = j.at("downsampler").get<std::string>();
        if (s == "decimate")
            d.downsampler = deg::Downsampler::Decimate;
        else if (s == "bicubic")
            d.downsampler = deg::Downsampler::Bicubic;
        else
            throw InvalidParameter("downsampler must be 'decimate' or 'bicubic'");
    }
}

void parse_network(const json& j, net::NetworkSpec& n) {
    reject_unknown(j,
                   {"variant", "block_type", "width", "blocks_per_stage", "encoder_levels",
                    "scale", "in_channels", "out_channels", "encoder_down", "global_residual"},
                   "network");
    if (j.contains("variant")) n.variant = net::variant_from_string(j.at("variant"));
    if (j.contains("block_type")) n.block_type = net::block_type_from_string(j.at("block_type"));
    n.width = j.value("width", n.width);
    n.blocks_per_stage = j.value("blocks_per_stage", n.blocks_per_stage);
    n.encoder_levels = j.value("encoder_levels", n.encoder_levels);
    n.scale = j.value("scale", n.scale);
    n.in_channels = j.value("in_channels", n.in_channels);
    n.out_channels = j.value("out_channels", n.out_channels);
    if (j.contains("encoder_down")) {
        const auto s = j.at("encoder_down").get<std::string>();
        if (s == "stride2")
            n.encoder_down = net::EncoderDown::StridedConv;
        else if (s == "maxpool")
            n.encoder_down = net::EncoderDown::MaxPool;
        else
            throw InvalidParameter("encoder_down must be 'stride2' or 'maxpool'");
    }
    n.global_residual = j.value("global_residual", n.global_residual);
}

void parse_training(const json& j, train::TrainConfig& t) {
    reject_unknown(j,
                   {"total_iters", "batch", "patch_size", "lr_init", "lr_final", "beta1", "beta2",
                    "weight_decay", "adam_eps", "checkpoint_interval", "log_interval",
                    "val_interval", "val_max_images"},
                   "training");
    t.total_iters = j.value("total_iters", t.total_iters);
    t.batch = j.value("batch", t.batch);
    t.patch_size = j.value("patch_size", t.patch_size);
    t.lr_init = j.value("lr_init", t.lr_init);
    t.lr_final = j.value("lr_final", t.lr_final);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.weight_decay = j.value("weight_decay", t.weight_decay);
    t.adam_eps = j.value("adam_eps", t.adam_eps);
    t.checkpoint_interval = j.value("checkpoint_interval", t.checkpoint_interval);
    t.log_interval = j.value("log_interval", t.log_interval);
    t.val_interval = j.value("val_interval", t.val_interval);
    t.val_max_images = j.value("val_max_images", t.val_max_images);
}

void parse_paths(const json& j, RunConfig& c) {
    reject_unknown(j, {"data_root", "train_split", "val_split", "out_dir"}, "paths");
    if (j.contains("data_root")) c.data_root = j.at("data_root").get<std::string>();
    c.train_split = j.value("train_split", c.train_split);
    c.val_split = j.value("val_split", c.val_split);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw InvalidParameter(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j, {"seed", "degradation", "network", "training", "paths", "channel_mode"},
                   "top level");
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    if (j.contains("degradation")) parse_degradation(j.at("degradation"), c.degradation);
    if (j.contains("network")) parse_network(j.at("network"), c.network);
    if (j.contains("training")) parse_training(j.at("training"), c.training);
    if (j.contains("paths")) parse_paths(j.at("paths"), c);
    if (j.contains("channel_mode")) {
        const auto s = j.at("channel_mode").get<std::string>();
        if (s == "rgb")
            c.channel_mode = data::ChannelMode::Rgb;
        else if (s == "grayscale")
            c.channel_mode = data::ChannelMode::Grayscale;
        else
            throw InvalidParameter("channel_mode must be 'rgb' or 'grayscale'");
    }
    // grayscale training implies single-channel tensors
    if (c.channel_mode == data::ChannelMode::Grayscale &&
        !(j.contains("network") && j.at("network").contains("in_channels"))) {
        c.network.in_channels = 1;
        c.network.out_channels = 1;
    }
    c.training.seed = c.seed;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["channel_mode"] = channel_mode == data::ChannelMode::Grayscale ? "grayscale" : "rgb";
    j["degradation"] = {
        {"scale", degradation.scale},
        {"alpha", degradation.alpha},
        {"beta", degradation.beta},
        {"noise_max", degradation.noise_max},
        {"downsampler", degradation.downsampler == deg::Downsampler::Bicubic ? "bicubic"
                                                                             : "decimate"}};
    j["network"] = json::parse(network.to_json());
    j["training"] = {{"total_iters", training.total_iters},
                     {"batch", training.batch},
                     {"patch_size", training.patch_size},
                     {"lr_init", training.lr_init},
                     {"lr_final", training.lr_final},
                     {"beta1", training.beta1},
                     {"beta2", training.beta2},
                     {"weight_decay", training.weight_decay},
                     {"adam_eps", training.adam_eps},
                     {"checkpoint_interval", training.checkpoint_interval},
                     {"log_interval", training.log_interval},
                     {"val_interval", training.val_interval},
                     {"val_max_images", training.val_max_images}};
    j["paths"] = {{"data_root", data_root.string()},
                  {"train_split", train_split},
                  {"val_split", val_split},
                  {"out_dir", out_dir.string()}};
    return j.dump(2);
}

}  // namespace jsr::cfg
