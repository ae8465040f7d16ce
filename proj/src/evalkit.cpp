#include "jsr/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jsr/kernels.hpp"

namespace jsr::eval {

void EvalReport::finalize() {
    if (psnr_db.empty()) {
        mean_psnr_db = 0.0;
        return;
    }
    double acc = 0.0;
    for (double v : psnr_db) acc += v;
    mean_psnr_db = acc / static_cast<double>(psnr_db.size());
}

double psnr(const ImageTensor& a, const ImageTensor& b, double peak) {
    if (!a.same_shape(b))
        throw InvalidParameter("psnr shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    if (!(peak > 0.0)) throw InvalidParameter("psnr peak must be > 0");
    double acc = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

double cubic(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t < 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

/// One separable pass along the last axis of a (C, H, W) tensor.
ImageTensor resample_axis_w(const ImageTensor& in, int64_t scale, ResizeDirection dir) {
    const int64_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int64_t ow = dir == ResizeDirection::Up ? W * scale : W / scale;
    ImageTensor out({C, H, ow});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < ow; ++x) {
                double acc = 0.0, wsum = 0.0;
                if (dir == ResizeDirection::Up) {
                    const double sx = static_cast<double>(x) / static_cast<double>(scale);
                    const int64_t base = static_cast<int64_t>(std::floor(sx));
                    for (int64_t k = base - 1; k <= base + 2; ++k) {
                        const double w = cubic(sx - static_cast<double>(k));
                        acc += w * in.at3(c, y, reflect_index(k, W));
                        wsum += w;
                    }
                } else {
                    const int64_t center = x * scale;
                    const double inv = 1.0 / static_cast<double>(scale);
                    for (int64_t k = center - 2 * scale; k <= center + 2 * scale; ++k) {
                        const double w = cubic(static_cast<double>(k - center) * inv);
                        if (w == 0.0) continue;
                        acc += w * in.at3(c, y, reflect_index(k, W));
                        wsum += w;
                    }
                }
                out.at3(c, y, x) = acc / wsum;
            }
    return out;
}

ImageTensor transpose_hw(const ImageTensor& in) {
    const int64_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    ImageTensor out({C, W, H});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) out.at3(c, x, y) = in.at3(c, y, x);
    return out;
}

}  // namespace

ImageTensor bicubic_resize(const ImageTensor& image, int64_t scale, ResizeDirection direction) {
    if (scale < 1) throw InvalidParameter("bicubic_resize scale must be >= 1");
    if (image.ndim() != 3) throw InvalidParameter("bicubic_resize expects (C,H,W)");
    if (scale == 1) return image;
    if (direction == ResizeDirection::Down &&
        (image.dim(1) % scale != 0 || image.dim(2) % scale != 0))
        throw InvalidParameter("bicubic downscale requires dims divisible by scale");
    ImageTensor t = resample_axis_w(image, scale, direction);
    t = transpose_hw(t);
    t = resample_axis_w(t, scale, direction);
    return transpose_hw(t);
}

ImageTensor lucy_richardson(const ImageTensor& observed, const deg::GaussianKernel& psf,
                            int64_t iters) {
    if (iters < 0) throw InvalidParameter("lucy_richardson iters must be >= 0");
    for (int64_t i = 0; i < observed.size(); ++i)
        if (observed[i] < 0.0) throw InvalidParameter("lucy_richardson input must be non-negative");
    constexpr double eps = 1e-12;
    ImageTensor u = observed;
    Tensor blurred, ratio_blurred;
    ImageTensor ratio(observed.dims());
    // The Gaussian PSF is symmetric, so correlation with the flipped kernel
    // equals correlation with the kernel itself.
    for (int64_t it = 0; it < iters; ++it) {
        correlate2d_reflect(u, psf.weights, blurred);
        for (int64_t i = 0; i < ratio.size(); ++i)
            ratio[i] = observed[i] / (blurred[i] + eps);
        correlate2d_reflect(ratio, psf.weights, ratio_blurred);
        for (int64_t i = 0; i < u.size(); ++i) u[i] *= ratio_blurred[i];
    }
    return u;
}

std::vector<EvalReport> compare_methods(const std::vector<ImageTensor>& lr_set,
                                        const std::vector<ImageTensor>& hr_set,
                                        const std::vector<std::string>& names,
                                        const std::vector<Method>& methods,
                                        const std::string& fingerprint) {
    if (lr_set.size() != hr_set.size() || lr_set.size() != names.size())
        throw InvalidParameter("compare_methods: lr/hr/name sets are misaligned (" +
                               std::to_string(lr_set.size()) + "/" +
                               std::to_string(hr_set.size()) + "/" +
                               std::to_string(names.size()) + ")");
    if (lr_set.empty()) throw InvalidParameter("compare_methods: empty input sets");
    std::vector<EvalReport> reports;
    for (const auto& method : methods) {
        EvalReport rep;
        rep.method = method.name;
        rep.fingerprint = fingerprint;
        rep.image_names = names;
        for (size_t i = 0; i < lr_set.size(); ++i) {
            ImageTensor sr = method.run(lr_set[i], i);
            rep.psnr_db.push_back(psnr(sr, hr_set[i]));
        }
        rep.finalize();
        reports.push_back(std::move(rep));
    }
    return reports;
}

std::string render_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "method                          mean PSNR (dB)   images\n";
    for (const auto& r : reports) {
        std::ostringstream v;
        if (std::isinf(r.mean_psnr_db))
            v << "inf";
        else
            v << std::fixed << std::setprecision(3) << r.mean_psnr_db;
        out << r.method;
        for (size_t i = r.method.size(); i < 32; ++i) out << ' ';
        std::string vs = v.str();
        out << vs;
        for (size_t i = vs.size(); i < 17; ++i) out << ' ';
        out << r.psnr_db.size() << "\n";
    }
    return out.str();
}

std::string render_json(const std::vector<EvalReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["method"] = r.method;
        j["fingerprint"] = r.fingerprint;
        j["mean_psnr_db"] = std::isinf(r.mean_psnr_db) ? nlohmann::json("inf")
                                                       : nlohmann::json(r.mean_psnr_db);
        nlohmann::json per = nlohmann::json::array();
        for (size_t i = 0; i < r.psnr_db.size(); ++i) {
            nlohmann::json e;
            e["image"] = r.image_names[i];
            e["psnr_db"] = std::isinf(r.psnr_db[i]) ? nlohmann::json("inf")
                                                    : nlohmann::json(r.psnr_db[i]);
            per.push_back(e);
        }
        j["per_image"] = per;
        arr.push_back(j);
    }
    return arr.dump(2);
}

}  // namespace jsr::eval
