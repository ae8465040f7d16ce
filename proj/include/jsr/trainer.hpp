#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jsr/datapipe.hpp"
#include "jsr/jnet.hpp"

namespace jsr::train {

struct CorruptCheckpoint : DataError {
    explicit CorruptCheckpoint(const std::string& msg) : DataError(msg) {}
};

struct TrainConfig {
    int64_t total_iters = 200000;
    int64_t batch = 32;
    int64_t patch_size = 96;
    double lr_init = 1e-3;
    double lr_final = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 1e-4;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    int64_t checkpoint_interval = 1000;
    int64_t log_interval = 100;
    int64_t val_interval = 1000;
    int64_t val_max_images = 0;  // 0 = all

    void validate() const;
};

struct TrainState {
    net::NetworkSpec spec;
    net::NetworkParams params;
    std::vector<Tensor> moment1;  // shape-matched to params
    std::vector<Tensor> moment2;
    int64_t iter = 0;
    SeededRng::State rng_state{};

    static TrainState fresh(const net::NetworkSpec& spec, uint64_t seed);
};

struct MetricRecord {
    int64_t iter = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_psnr;
};

/// Mean over all elements of the squared difference.
double mse_loss(const Tensor& sr, const Tensor& hr);

/// lr(t) = lr_final + (lr_init - lr_final) * (1 + cos(pi * t / T)) / 2.
double cosine_lr(int64_t iter, const TrainConfig& cfg);

/// One forward/backward/AdamW update on the given batch at the current
/// cosine learning rate. Deterministic given (state, batch).
/// Returns the batch loss. Throws on a non-finite loss.
double train_step(TrainState& state, const Tensor& lr_batch, const Tensor& hr_batch,
                  const TrainConfig& cfg);

struct FitOptions {
    std::filesystem::path checkpoint_dir;
    std::filesystem::path metric_log;          // append-only text log
    std::optional<std::filesystem::path> resume_from;
    const data::Corpus* val_corpus = nullptr;  // optional validation split
    deg::DegradationConfig degradation;
    data::ChannelMode channel_mode = data::ChannelMode::Rgb;
    // Stop this invocation after the given iteration without touching the lr
    // schedule (0 = run to total_iters); a later resume continues the run.
    int64_t stop_after = 0;
};

/// Runs the full training loop with periodic validation and checkpoints.
TrainState fit(const data::Corpus& corpus, const net::NetworkSpec& spec, const TrainConfig& cfg,
               const FitOptions& opts, std::vector<MetricRecord>* metrics = nullptr);

/// Mean validation PSNR of `state.params` on a corpus whose degradation is
/// re-derived per image from a fixed seed (stable across evaluations).
double validate_psnr(const TrainState& state, const data::Corpus& corpus,
                     const deg::DegradationConfig& dcfg, data::ChannelMode mode, uint64_t seed,
                     int64_t max_images = 0);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace jsr::train
