#pragma once

#include "jsr/rng.hpp"
#include "jsr/tensor.hpp"

namespace jsr::deg {

/// Normalized isotropic Gaussian blur kernel sampled on an odd square grid.
struct GaussianKernel {
    double sigma = 1.0;
    int64_t size = 3;
    Tensor weights;  // (1, size, size), non-negative, sums to 1
};

enum class Downsampler { Decimate, Bicubic };

struct DegradationConfig {
    int64_t scale = 2;       // accepted: 1, 2, 4
    double alpha = 0.1;      // lower bound of the blur-width range
    double beta = 3.0;       // upper bound of the blur-width range
    double noise_max = 10.0 / 255.0;  // noise std drawn uniformly from [0, noise_max]
    Downsampler downsampler = Downsampler::Decimate;

    void validate() const;
};

/// Values sampled while degrading one image; enough to replay the chain.
struct DegradationMeta {
    double sigma = 0.0;
    double noise_std = 0.0;
    uint64_t seed = 0;
};

/// Kernel size policy: 2*ceil(3*sigma)+1, clamped to >= 3.
int64_t kernel_size_for_sigma(double sigma);

GaussianKernel make_gaussian_kernel(double sigma, int64_t size);

double sample_sigma(double alpha, double beta, SeededRng& rng);

/// Reflect-padded per-channel correlation with a unit-sum kernel.
ImageTensor blur(const ImageTensor& image, const GaussianKernel& kernel);

/// Direct decimation: keep the top-left pixel of each scale x scale cell.
ImageTensor downsample(const ImageTensor& image, int64_t scale);

/// Anti-aliased cubic downsampling, offered for ablation.
ImageTensor downsample_bicubic(const ImageTensor& image, int64_t scale);

/// Additive white Gaussian noise, clamped to [0,1].
ImageTensor add_noise(const ImageTensor& image, double noise_std, SeededRng& rng);

/// Full chain of blur -> downsample -> noise with freshly sampled sigma and
/// noise std. `meta` records every sampled value.
ImageTensor degrade(const ImageTensor& hr, const DegradationConfig& cfg, SeededRng& rng,
                    DegradationMeta& meta);

/// Replays a recorded degradation bit-exactly from its meta record.
ImageTensor degrade_replay(const ImageTensor& hr, const DegradationConfig& cfg,
                           const DegradationMeta& meta);

}  // namespace jsr::deg
