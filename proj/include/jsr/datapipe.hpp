#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jsr/degradation.hpp"
#include "jsr/rng.hpp"
#include "jsr/tensor.hpp"

namespace jsr::data {

struct EmptyCorpus : DataError {
    explicit EmptyCorpus(const std::string& msg) : DataError(msg) {}
};

struct ImageRecord {
    std::filesystem::path path;
    int64_t channels = 0;
    int64_t height = 0;
    int64_t width = 0;
};

struct Corpus {
    std::filesystem::path root;
    std::string split;
    std::vector<ImageRecord> records;                 // lexicographic by path
    std::vector<std::pair<std::string, std::string>> failures;  // (path, reason)
};

enum class ChannelMode { Rgb, Grayscale };

struct PatchPair {
    ImageTensor hr;
    ImageTensor lr;
    deg::DegradationMeta meta;
    size_t image_index = 0;
};

/// Scans <root>/<split>/ for raster images; decodes each to capture dims.
/// Undecodable files are reported in `failures`, never silently dropped.
Corpus scan_corpus(const std::filesystem::path& root, const std::string& split);

ImageTensor random_crop(const ImageTensor& hr, int64_t size, SeededRng& rng);

/// Horizontal flip with p=0.5 and a 90-degree-multiple rotation with p=0.5,
/// drawn independently. Requires a square input.
ImageTensor augment(const ImageTensor& hr, SeededRng& rng);

/// Draws one (hr, lr) patch pair: uniform image choice, random crop,
/// augmentation, then the degradation chain.
PatchPair draw_pair(const Corpus& corpus, const deg::DegradationConfig& cfg, int64_t patch_size,
                    ChannelMode mode, SeededRng& rng);

/// Assembles `batch` independent pairs into (N,C,h,w) stacks. The result is a
/// pure function of (corpus, cfg, rng state), so deriving the rng from
/// (seed, step) makes batches independent of worker scheduling.
void next_batch(const Corpus& corpus, const deg::DegradationConfig& cfg, int64_t batch,
                int64_t patch_size, ChannelMode mode, SeededRng& rng, Tensor& lr_batch,
                Tensor& hr_batch);

ImageTensor load_for_mode(const ImageRecord& rec, ChannelMode mode);

}  // namespace jsr::data
