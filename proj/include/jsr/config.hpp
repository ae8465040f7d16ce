#pragma once

#include <filesystem>
#include <string>

#include "jsr/datapipe.hpp"
#include "jsr/degradation.hpp"
#include "jsr/jnet.hpp"
#include "jsr/trainer.hpp"

namespace jsr::cfg {

/// Merged run configuration. Defaults are the desk-scale preset (width 32,
/// 2 encoder levels, 5K iterations, batch 8); the paper-scale recipe is a
/// config file away. Unknown keys are rejected.
struct RunConfig {
    uint64_t seed = 0;
    deg::DegradationConfig degradation;
    net::NetworkSpec network;
    train::TrainConfig training;
    data::ChannelMode channel_mode = data::ChannelMode::Rgb;
    std::filesystem::path data_root;
    std::string train_split = "train";
    std::string val_split = "val";
    std::filesystem::path out_dir = "runs";

    RunConfig();

    void validate() const;

    /// Parses a JSON config file; any unknown key is an error.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

}  // namespace jsr::cfg
