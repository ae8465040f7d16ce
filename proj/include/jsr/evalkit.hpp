#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "jsr/degradation.hpp"
#include "jsr/tensor.hpp"

namespace jsr::eval {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

struct EvalReport {
    std::string method;
    std::vector<std::string> image_names;
    std::vector<double> psnr_db;  // +inf sentinel for exact matches
    double mean_psnr_db = 0.0;    // arithmetic mean (inf if any entry is inf)
    std::string fingerprint;      // identifies (inputs, degradation, seed)

    void finalize();
};

/// 10*log10(peak^2 / MSE); +inf sentinel when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0);

/// Cubic-convolution resampling (a = -0.5, reflect boundary) by an integer
/// factor. Up maps output position x to source x/scale, so original sample
/// positions are reproduced exactly; down is anti-aliased.
enum class ResizeDirection { Up, Down };
ImageTensor bicubic_resize(const ImageTensor& image, int64_t scale, ResizeDirection direction);

/// Multiplicative Richardson-Lucy deconvolution with a known PSF.
/// u <- u * (psf_T (*) (observed / (psf (*) u))), u0 = observed.
ImageTensor lucy_richardson(const ImageTensor& observed, const deg::GaussianKernel& psf,
                            int64_t iters);

/// A method maps one LR image (plus its index) to an SR image.
struct Method {
    std::string name;
    std::function<ImageTensor(const ImageTensor& lr, size_t index)> run;
};

/// Evaluates every method on the same aligned (lr, hr) sets.
std::vector<EvalReport> compare_methods(const std::vector<ImageTensor>& lr_set,
                                        const std::vector<ImageTensor>& hr_set,
                                        const std::vector<std::string>& names,
                                        const std::vector<Method>& methods,
                                        const std::string& fingerprint);

/// Plain-text tabular rendering of reports (one row per method).
std::string render_table(const std::vector<EvalReport>& reports);

/// Machine-readable (JSON) rendering, per-image values included.
std::string render_json(const std::vector<EvalReport>& reports);

}  // namespace jsr::eval
