#include "jsr/degradation.hpp"

#include <algorithm>
#include <cmath>

#include "jsr/kernels.hpp"

namespace jsr::deg {

void DegradationConfig::validate() const {
    if (scale != 1 && scale != 2 && scale != 4)
        throw InvalidParameter("scale must be 1, 2 or 4, got " + std::to_string(scale));
    if (!(alpha >= 0.0) || !(beta > alpha))
        throw InvalidParameter("blur-width range requires 0 <= alpha < beta");
    if (noise_max < 0.0) throw InvalidParameter("noise_max must be >= 0");
}

int64_t kernel_size_for_sigma(double sigma) {
    int64_t size = 2 * static_cast<int64_t>(std::ceil(3.0 * sigma)) + 1;
    return std::max<int64_t>(size, 3);
}

GaussianKernel make_gaussian_kernel(double sigma, int64_t size) {
    if (!(sigma > 0.0)) throw InvalidParameter("sigma must be > 0");
    if (size < 3 || size % 2 == 0) throw InvalidParameter("kernel size must be odd and >= 3");
    GaussianKernel k;
    k.sigma = sigma;
    k.size = size;
    k.weights = Tensor({1, size, size});
    const int64_t r = size / 2;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    double sum = 0.0;
    for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y - r);
            const double dx = static_cast<double>(x - r);
            const double w = std::exp(-(dx * dx + dy * dy) * inv2s2);
            k.weights.at3(0, y, x) = w;
            sum += w;
        }
    for (auto& w : k.weights.vec()) w /= sum;
    return k;
}

double sample_sigma(double alpha, double beta, SeededRng& rng) {
    if (!(alpha >= 0.0) || !(beta > alpha))
        throw InvalidParameter("sample_sigma requires 0 <= alpha < beta");
    return rng.uniform(alpha, beta);
}

ImageTensor blur(const ImageTensor& image, const GaussianKernel& kernel) {
    if (image.ndim() != 3) throw InvalidParameter("blur expects a (C,H,W) image");
    if (kernel.size > std::min(image.dim(1), image.dim(2)))
        throw InvalidParameter("kernel larger than image");
    Tensor out;
    correlate2d_reflect(image, kernel.weights, out);
    return out;
}

ImageTensor downsample(const ImageTensor& image, int64_t scale) {
    if (scale < 1) throw InvalidParameter("scale must be >= 1");
    if (scale == 1) return image;
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H % scale != 0 || W % scale != 0)
        throw InvalidParameter("image dims " + image.shape_str() + " not divisible by scale " +
                               std::to_string(scale));
    ImageTensor out({C, H / scale, W / scale});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H / scale; ++y)
            for (int64_t x = 0; x < W / scale; ++x)
                out.at3(c, y, x) = image.at3(c, y * scale, x * scale);
    return out;
}

namespace {

double cubic_weight(double t, double scale_inv) {
    // Cubic convolution kernel, a = -0.5, optionally widened for antialiasing.
    const double a = -0.5;
    t = std::abs(t) * scale_inv;
    if (t < 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

}  // namespace

ImageTensor downsample_bicubic(const ImageTensor& image, int64_t scale) {
    if (scale < 1) throw InvalidParameter("scale must be >= 1");
    if (scale == 1) return image;
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H % scale != 0 || W % scale != 0)
        throw InvalidParameter("image dims not divisible by scale");
    const int64_t oh = H / scale, ow = W / scale;
    const double inv = 1.0 / static_cast<double>(scale);
    const int64_t support = 2 * scale;
    ImageTensor out({C, oh, ow});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < oh; ++y)
            for (int64_t x = 0; x < ow; ++x) {
                const int64_t cy = y * scale, cx = x * scale;
                double acc = 0.0, wsum = 0.0;
                for (int64_t dy = -support; dy <= support; ++dy)
                    for (int64_t dx = -support; dx <= support; ++dx) {
                        const double w = cubic_weight(static_cast<double>(dy), inv) *
                                         cubic_weight(static_cast<double>(dx), inv);
                        if (w == 0.0) continue;
                        acc += w * image.at3(c, reflect_index(cy + dy, H), reflect_index(cx + dx, W));
                        wsum += w;
                    }
                out.at3(c, y, x) = acc / wsum;
            }
    return out;
}

ImageTensor add_noise(const ImageTensor& image, double noise_std, SeededRng& rng) {
    if (noise_std < 0.0) throw InvalidParameter("noise_std must be >= 0");
    if (noise_std == 0.0) return image;
    ImageTensor out = image;
    for (auto& v : out.vec()) v = std::clamp(v + noise_std * rng.gaussian(), 0.0, 1.0);
    return out;
}

ImageTensor degrade(const ImageTensor& hr, const DegradationConfig& cfg, SeededRng& rng,
                    DegradationMeta& meta) {
    cfg.validate();
    meta.sigma = sample_sigma(cfg.alpha, cfg.beta, rng);
    meta.noise_std = cfg.noise_max > 0.0 ? rng.uniform(0.0, cfg.noise_max) : 0.0;
    meta.seed = rng.next_u64();
    return degrade_replay(hr, cfg, meta);
}

ImageTensor degrade_replay(const ImageTensor& hr, const DegradationConfig& cfg,
                           const DegradationMeta& meta) {
    ImageTensor lr = hr;
    if (meta.sigma > 0.0) {
        int64_t size = kernel_size_for_sigma(meta.sigma);
        const int64_t max_size = std::min(hr.dim(1), hr.dim(2));
        if (size > max_size) size = (max_size % 2 == 1) ? max_size : max_size - 1;
        lr = blur(hr, make_gaussian_kernel(meta.sigma, size));
    }
    lr = cfg.downsampler == Downsampler::Bicubic ? downsample_bicubic(lr, cfg.scale)
                                                 : downsample(lr, cfg.scale);
    SeededRng noise_rng(meta.seed);
    return add_noise(lr, meta.noise_std, noise_rng);
}

}  // namespace jsr::deg
