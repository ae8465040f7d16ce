// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier training criteria use reduced-size configurations chosen
// to finish on a single core; the properties they check are size-independent.

#include <unistd.h>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "jsr/datapipe.hpp"
#include "jsr/degradation.hpp"
#include "jsr/evalkit.hpp"
#include "jsr/image.hpp"
#include "jsr/jnet.hpp"
#include "jsr/kernels.hpp"
#include "jsr/netops.hpp"
#include "jsr/trainer.hpp"

using namespace jsr;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string name;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%2d] %s  %-34s (%.1fs)%s%s\n", id, ok ? "PASS" : "FAIL", name.c_str(), secs,
                    detail.empty() ? "" : "  -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++g_failures;
    }
};

ImageTensor random_image(int64_t c, int64_t h, int64_t w, SeededRng& rng) {
    ImageTensor im({c, h, w});
    for (auto& v : im.vec()) v = rng.uniform();
    return im;
}

// Smooth band-limited image: sum of a few low-frequency sinusoids.
ImageTensor smooth_image(int64_t h, int64_t w, uint64_t seed) {
    SeededRng rng(seed);
    ImageTensor im({1, h, w});
    double amp[3], fy[3], fx[3], ph[3];
    for (int k = 0; k < 3; ++k) {
        amp[k] = rng.uniform(0.05, 0.15);
        fy[k] = rng.uniform(1.0, 3.0);
        fx[k] = rng.uniform(1.0, 3.0);
        ph[k] = rng.uniform(0.0, 6.28);
    }
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double v = 0.5;
            for (int k = 0; k < 3; ++k)
                v += amp[k] * std::sin(2.0 * M_PI * (fy[k] * y / h + fx[k] * x / w) + ph[k]);
            im.at3(0, y, x) = std::clamp(v, 0.0, 1.0);
        }
    return im;
}

struct TempDir {
    fs::path root;
    explicit TempDir(const std::string& tag) {
        root = fs::temp_directory_path() / ("jsr_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempDir() { fs::remove_all(root); }
};

void write_corpus(const fs::path& dir, int count, int64_t size, uint64_t seed0) {
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i)
        img::save(dir / ("img" + std::to_string(100 + i) + ".pgm"),
                  smooth_image(size, size, seed0 + i), 16);
}

// ---------------------------------------------------------------- criteria

void criterion_1_blur_oracle() {
    Criterion c(1, "blur vs naive reference");
    SeededRng rng(101);
    double max_diff = 0.0;
    for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
        int64_t size = deg::kernel_size_for_sigma(sigma);
        if (size > 15) size = 15;  // clamp to the image, as degrade() does
        auto k = deg::make_gaussian_kernel(sigma, size);
        for (int i = 0; i < 50; ++i) {
            ImageTensor im = random_image(1, 16, 16, rng);
            Tensor fast, naive;
            correlate2d_reflect(im, k.weights, fast);
            ref::correlate2d_reflect_naive(im, k.weights, naive);
            for (int64_t j = 0; j < fast.size(); ++j)
                max_diff = std::max(max_diff, std::abs(fast[j] - naive[j]));
        }
    }
    c.expect(max_diff < 1e-6, "max abs diff " + std::to_string(max_diff));
}

void criterion_2_kernel_properties() {
    Criterion c(2, "gaussian kernel properties");
    SeededRng rng(102);
    for (int i = 0; i < 100 && c.ok; ++i) {
        const double sigma = rng.uniform(0.1, 10.0);
        auto k = deg::make_gaussian_kernel(sigma, deg::kernel_size_for_sigma(sigma));
        double sum = 0.0;
        for (double v : k.weights.vec()) sum += v;
        c.expect(std::abs(sum - 1.0) <= 1e-9, "sum != 1 at sigma " + std::to_string(sigma));
        const int64_t s = k.size;
        double maxw = 0.0;
        for (int64_t y = 0; y < s && c.ok; ++y)
            for (int64_t x = 0; x < s; ++x) {
                const double w = k.weights.at3(0, y, x);
                c.expect(w == k.weights.at3(0, s - 1 - y, x) &&
                             w == k.weights.at3(0, y, s - 1 - x) && w == k.weights.at3(0, x, y),
                         "asymmetry at sigma " + std::to_string(sigma));
                maxw = std::max(maxw, w);
            }
        c.expect(k.weights.at3(0, s / 2, s / 2) == maxw, "center not maximal");
    }
}

// Scalar loss of a graph output against a fixed target (mse), used for both
// analytic gradients and finite differences.
double scalar_loss(const ops::Var& out, const Tensor& target) {
    return ops::mse(out, ops::leaf(target, false))->value[0];
}

// Max relative error between analytic gradient and central differences over
// the given coordinates of `param`, where `eval` recomputes the loss.
double fd_check(Tensor& param, const Tensor& grad, const std::function<double()>& eval,
                const std::vector<int64_t>& coords, double step = 1e-5) {
    double worst = 0.0;
    for (int64_t i : coords) {
        const double keep = param[i];
        param[i] = keep + step;
        const double lp = eval();
        param[i] = keep - step;
        const double lm = eval();
        param[i] = keep;
        const double fd = (lp - lm) / (2.0 * step);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    return worst;
}

std::vector<int64_t> all_coords(const Tensor& t) {
    std::vector<int64_t> v(t.size());
    for (int64_t i = 0; i < t.size(); ++i) v[i] = i;
    return v;
}

void criterion_3_gradients() {
    Criterion c(3, "analytic vs finite-difference grads");
    SeededRng rng(103);

    // individual ops, input gradients, tolerance 1e-4
    {
        Tensor x({2, 4, 5, 5});
        for (auto& v : x.vec()) v = rng.uniform(-1.0, 1.0);
        Tensor gamma({4}, 1.0), beta({4}, 0.0);
        Tensor target({2, 4, 5, 5});
        for (auto& v : target.vec()) v = rng.uniform();
        auto run = [&](const std::function<ops::Var(ops::Var)>& f, const Tensor& tgt) {
            ops::Var in = ops::leaf(x, true);
            ops::Var out = f(in);
            ops::Var loss = ops::mse(out, ops::leaf(tgt, false));
            ops::backward(loss);
            auto eval = [&]() {
                ops::Var i2 = ops::leaf(x, false);
                return scalar_loss(f(i2), tgt);
            };
            return fd_check(x, in->grad, eval, all_coords(x));
        };
        const double e_ln = run(
            [&](ops::Var v) { return ops::layer_norm(v, ops::leaf(gamma, false),
                                                     ops::leaf(beta, false), 1e-6); },
            target);
        c.expect(e_ln < 1e-4, "layer_norm grad err " + std::to_string(e_ln));

        Tensor tgt_half({2, 2, 5, 5});
        for (auto& v : tgt_half.vec()) v = rng.uniform();
        const double e_sg = run([&](ops::Var v) { return ops::simple_gate(v); }, tgt_half);
        c.expect(e_sg < 1e-4, "simple_gate grad err " + std::to_string(e_sg));

        Tensor scw({4, 4});
        for (auto& v : scw.vec()) v = rng.uniform(-0.5, 0.5);
        Tensor scb({4}, 0.1);
        const double e_sca = run(
            [&](ops::Var v) {
                return ops::sca(v, ops::leaf(scw, false), ops::leaf(scb, false));
            },
            target);
        c.expect(e_sca < 1e-4, "sca grad err " + std::to_string(e_sca));
    }

    // baseline block, parameter gradients, tolerance 1e-3
    {
        auto params = net::make_baseline_block_params(4, rng);
        Tensor x({1, 4, 6, 6});
        for (auto& v : x.vec()) v = rng.uniform();
        Tensor target({1, 4, 6, 6});
        for (auto& v : target.vec()) v = rng.uniform();
        std::vector<ops::Var> leaves;
        auto out = net::baseline_block_forward(params, x, true, &leaves);
        ops::Var loss = ops::mse(out, ops::leaf(target, false));
        ops::backward(loss);
        double worst = 0.0;
        for (size_t p = 0; p < params.named.size(); ++p) {
            if (!leaves[p] || leaves[p]->grad.empty()) continue;
            Tensor grad = leaves[p]->grad;
            auto eval = [&]() {
                return scalar_loss(net::baseline_block_forward(params, x, true, nullptr), target);
            };
            std::vector<int64_t> coords = all_coords(params.named[p].second);
            if (coords.size() > 40) coords.resize(40);
            worst = std::max(worst, fd_check(params.named[p].second, grad, eval, coords));
        }
        c.expect(worst < 1e-3, "baseline block grad err " + std::to_string(worst));
    }

    // full tiny network (width 8, levels 1), sampled parameter coordinates
    {
        net::NetworkSpec spec;
        spec.variant = net::Variant::JNet;
        spec.width = 8;
        spec.blocks_per_stage = 1;
        spec.encoder_levels = 1;
        spec.scale = 2;
        spec.in_channels = 1;
        spec.out_channels = 1;
        auto params = net::build_network(spec, rng);
        Tensor x({1, 1, 8, 8});
        for (auto& v : x.vec()) v = rng.uniform();
        Tensor target({1, 1, 16, 16});
        for (auto& v : target.vec()) v = rng.uniform();
        std::vector<ops::Var> leaves;
        ops::Var out = net::forward_graph(params, spec, x, true, &leaves);
        ops::Var loss = ops::mse(out, ops::leaf(target, false));
        ops::backward(loss);
        auto eval = [&]() {
            return scalar_loss(net::forward_graph(params, spec, x, true, nullptr), target);
        };
        double worst = 0.0;
        SeededRng pick(1033);
        int checked = 0;
        while (checked < 150) {
            const size_t p = static_cast<size_t>(
                pick.uniform_int(static_cast<int64_t>(params.named.size())));
            if (!leaves[p] || leaves[p]->grad.empty()) continue;
            Tensor& t = params.named[p].second;
            const int64_t i = pick.uniform_int(t.size());
            worst = std::max(worst, fd_check(t, leaves[p]->grad, eval, {i}));
            ++checked;
        }
        c.expect(worst < 1e-3, "full-net grad err " + std::to_string(worst));
    }
}

void criterion_4_shapes() {
    Criterion c(4, "2x shape contract + shuffle");
    SeededRng rng(104);
    for (net::Variant v : {net::Variant::FlatUnet, net::Variant::UnetPS, net::Variant::JNet}) {
        net::NetworkSpec s;
        s.variant = v;
        s.width = 8;
        s.blocks_per_stage = 1;
        s.encoder_levels = 2;
        s.scale = 2;
        auto params = net::build_network(s, rng);
        for (auto [h, w] : {std::pair<int64_t, int64_t>{48, 48}, {40, 48}, {96, 64}}) {
            Tensor x({1, 3, h, w});
            for (auto& vv : x.vec()) vv = rng.uniform();
            Tensor y = net::forward(params, s, x);
            c.expect(y.dims() == std::vector<int64_t>{1, 3, 2 * h, 2 * w},
                     "bad output " + y.shape_str() + " for " + net::to_string(v));
        }
    }
    // pixel shuffle round trip
    Tensor x({2, 12, 5, 7});
    for (auto& v : x.vec()) v = rng.uniform();
    Tensor shuffled = ops::pixel_shuffle_forward(x, 2);
    Tensor back = ops::pixel_unshuffle(shuffled, 2);
    bool exact = back.dims() == x.dims();
    for (int64_t i = 0; exact && i < x.size(); ++i) exact = back[i] == x[i];
    c.expect(exact, "pixel shuffle round trip not bit-exact");
}

void criterion_5_identity_residual() {
    Criterion c(5, "zeroed block is the identity");
    SeededRng rng(105);
    auto params = net::make_baseline_block_params(8, rng);
    for (auto& [name, t] : params.named)
        if (name.find("conv2.") != std::string::npos || name.find("conv4.") != std::string::npos)
            for (auto& v : t.vec()) v = 0.0;
    for (int trial = 0; trial < 20 && c.ok; ++trial) {
        Tensor x({1, 8, 7, 9});
        for (auto& v : x.vec()) v = rng.uniform(-2.0, 2.0);
        auto y = net::baseline_block_forward(params, x);
        bool exact = true;
        for (int64_t i = 0; exact && i < x.size(); ++i) exact = y->value[i] == x[i];
        c.expect(exact, "not bit-exact on trial " + std::to_string(trial));
    }
}

void criterion_6_overfit() {
    Criterion c(6, "single-image overfit > 40 dB");
    TempDir tmp("overfit");
    write_corpus(tmp.root / "train", 1, 16, 600);
    data::Corpus corpus = data::scan_corpus(tmp.root, "train");

    net::NetworkSpec spec;  // desk preset dims
    spec.variant = net::Variant::JNet;
    spec.width = 32;
    spec.blocks_per_stage = 1;
    spec.encoder_levels = 2;
    spec.scale = 2;
    spec.in_channels = 1;
    spec.out_channels = 1;

    train::TrainConfig cfg;
    cfg.total_iters = 500;
    cfg.batch = 2;
    cfg.patch_size = 16;  // the whole image: a single fixed training patch
    cfg.seed = 6;
    cfg.log_interval = 0;
    cfg.checkpoint_interval = 0;

    deg::DegradationConfig dcfg;
    dcfg.alpha = 0.49;  // essentially fixed blur, no noise
    dcfg.beta = 0.5;
    dcfg.noise_max = 0.0;

    train::FitOptions opts;
    opts.degradation = dcfg;
    opts.channel_mode = data::ChannelMode::Grayscale;
    train::TrainState st = train::fit(corpus, spec, cfg, opts);

    // PSNR on the training patch itself
    ImageTensor hr = img::load(corpus.records[0].path);
    SeededRng rng(999);
    deg::DegradationMeta meta;
    ImageTensor lr = deg::degrade(hr, dcfg, rng, meta);
    Tensor batch({1, 1, lr.dim(1), lr.dim(2)}, lr.vec());
    Tensor sr4 = net::forward(st.params, spec, batch);
    ImageTensor sr({1, sr4.dim(2), sr4.dim(3)}, sr4.vec());
    for (auto& v : sr.vec()) v = std::clamp(v, 0.0, 1.0);
    const double p = eval::psnr(sr, hr);
    std::ostringstream d;
    d.precision(4);
    d << "train-patch psnr " << p << " dB";
    c.note(d.str());
    c.expect(p > 40.0, "overfit psnr too low");
}

// Shared reduced configuration for the training-trend criteria.
struct TrendSetup {
    net::NetworkSpec spec(net::Variant v) const {
        net::NetworkSpec s;
        s.variant = v;
        s.width = 16;
        s.blocks_per_stage = 1;
        s.encoder_levels = 2;
        s.scale = 2;
        s.in_channels = 1;
        s.out_channels = 1;
        return s;
    }
    train::TrainConfig config(int64_t iters, uint64_t seed) const {
        train::TrainConfig cfg;
        cfg.total_iters = iters;
        cfg.batch = 4;
        cfg.patch_size = 32;
        cfg.seed = seed;
        cfg.log_interval = 0;
        cfg.checkpoint_interval = 0;
        return cfg;
    }
};

double run_and_validate(const data::Corpus& train_corpus, const data::Corpus& val_corpus,
                        const net::NetworkSpec& spec, const train::TrainConfig& cfg,
                        const deg::DegradationConfig& dcfg) {
    train::FitOptions opts;
    opts.degradation = dcfg;
    opts.channel_mode = data::ChannelMode::Grayscale;
    train::TrainState st = train::fit(train_corpus, spec, cfg, opts);
    return train::validate_psnr(st, val_corpus, dcfg, data::ChannelMode::Grayscale, 12345);
}

void criterion_7_trend(const data::Corpus& train_corpus, const data::Corpus& val_corpus) {
    Criterion c(7, "jnet >= flat-unet, beats bicubic");
    TrendSetup setup;
    deg::DegradationConfig dcfg;
    dcfg.alpha = 0.1;
    dcfg.beta = 1.0;
    dcfg.noise_max = 0.0;
    const int64_t iters = 5000;

    double mean_jnet = 0.0, mean_flat = 0.0;
    for (uint64_t seed : {11u, 22u, 33u}) {
        mean_jnet += run_and_validate(train_corpus, val_corpus, setup.spec(net::Variant::JNet),
                                      setup.config(iters, seed), dcfg);
        mean_flat += run_and_validate(train_corpus, val_corpus, setup.spec(net::Variant::FlatUnet),
                                      setup.config(iters, seed), dcfg);
    }
    mean_jnet /= 3.0;
    mean_flat /= 3.0;

    // bicubic baseline on the identical validation degradations
    double bicubic = 0.0;
    for (size_t i = 0; i < val_corpus.records.size(); ++i) {
        ImageTensor hr = data::load_for_mode(val_corpus.records[i], data::ChannelMode::Grayscale);
        SeededRng rng = SeededRng::derive(12345, i);
        deg::DegradationMeta meta;
        ImageTensor lr = deg::degrade(hr, dcfg, rng, meta);
        ImageTensor up = eval::bicubic_resize(lr, 2, eval::ResizeDirection::Up);
        for (auto& v : up.vec()) v = std::clamp(v, 0.0, 1.0);
        const double p = eval::psnr(up, hr);
        bicubic += std::isinf(p) ? 100.0 : p;
    }
    bicubic /= static_cast<double>(val_corpus.records.size());

    std::ostringstream d;
    d.precision(4);
    d << "jnet " << mean_jnet << " dB, flat-unet " << mean_flat << " dB, bicubic " << bicubic
      << " dB (3-seed means)";
    c.note(d.str());
    c.expect(mean_jnet >= mean_flat, "ordering violated");
    c.expect(mean_jnet >= bicubic + 1.0, "lead over bicubic < 1 dB");
}

void criterion_8_sigma_range(const data::Corpus& train_corpus, const data::Corpus& val_corpus) {
    Criterion c(8, "narrow blur range wins");
    TrendSetup setup;
    const int64_t iters = 1500;

    deg::DegradationConfig narrow;
    narrow.alpha = 0.1;
    narrow.beta = 1.0;
    narrow.noise_max = 0.0;
    deg::DegradationConfig wide;
    wide.alpha = 0.0;
    wide.beta = 10.0;
    wide.noise_max = 0.0;

    const double p_narrow = run_and_validate(train_corpus, val_corpus,
                                             setup.spec(net::Variant::JNet),
                                             setup.config(iters, 7), narrow);
    const double p_wide = run_and_validate(train_corpus, val_corpus,
                                           setup.spec(net::Variant::JNet),
                                           setup.config(iters, 7), wide);
    std::ostringstream d;
    d.precision(4);
    d << "(0.1,1) " << p_narrow << " dB vs (0,10) " << p_wide << " dB";
    c.note(d.str());
    c.expect(p_narrow >= p_wide, "range ordering violated");
}

void criterion_9_psnr_closed_form() {
    Criterion c(9, "psnr closed forms");
    ImageTensor a({1, 16, 16}, 0.5), b({1, 16, 16}, 0.5 + 1.0 / 255.0);
    const double p1 = eval::psnr(a, b);
    c.expect(std::abs(p1 - 48.1308036087) < 1e-3, "delta=1/255 gives " + std::to_string(p1));
    ImageTensor z({1, 16, 16}, 0.0), o({1, 16, 16}, 1.0);
    const double p2 = eval::psnr(z, o);
    c.expect(std::abs(p2) < 1e-3, "delta=peak gives " + std::to_string(p2));
}

void criterion_10_lucy_richardson() {
    Criterion c(10, "lucy-richardson properties");
    // synthetic blurred bar, sigma = 2
    ImageTensor sharp({1, 32, 32}, 0.1);
    for (int64_t y = 12; y < 20; ++y)
        for (int64_t x = 0; x < 32; ++x) sharp.at3(0, y, x) = 0.9;
    auto psf = deg::make_gaussian_kernel(2.0, deg::kernel_size_for_sigma(2.0));
    ImageTensor blurred = deg::blur(sharp, psf);

    auto mse = [](const ImageTensor& p, const ImageTensor& q) {
        double acc = 0.0;
        for (int64_t i = 0; i < p.size(); ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
        return acc / static_cast<double>(p.size());
    };
    // non-negativity at every iterate
    bool nonneg = true;
    for (int64_t it = 1; it <= 30 && nonneg; ++it) {
        ImageTensor u = eval::lucy_richardson(blurred, psf, it);
        for (double v : u.vec()) nonneg = nonneg && v >= 0.0;
    }
    c.expect(nonneg, "negative value in an iterate");
    ImageTensor restored = eval::lucy_richardson(blurred, psf, 30);
    c.expect(mse(restored, sharp) < mse(blurred, sharp), "no mse improvement");

    // near-delta psf is a near-identity
    SeededRng rng(110);
    ImageTensor im = random_image(1, 16, 16, rng);
    for (auto& v : im.vec()) v = 0.2 + 0.6 * v;
    auto delta = deg::make_gaussian_kernel(0.05, 3);
    ImageTensor out = eval::lucy_richardson(im, delta, 5);
    double max_diff = 0.0;
    for (int64_t i = 0; i < im.size(); ++i)
        max_diff = std::max(max_diff, std::abs(out[i] - im[i]));
    c.expect(max_diff < 1e-3, "near-delta diff " + std::to_string(max_diff));
}

void criterion_11_reproducibility() {
    Criterion c(11, "bitwise reproducible training");
    TempDir tmp("repro");
    write_corpus(tmp.root / "train", 4, 48, 1100);
    data::Corpus corpus = data::scan_corpus(tmp.root, "train");

    net::NetworkSpec spec;  // desk preset dims, shortened run
    spec.variant = net::Variant::JNet;
    spec.width = 32;
    spec.blocks_per_stage = 1;
    spec.encoder_levels = 2;
    spec.scale = 2;
    spec.in_channels = 1;
    spec.out_channels = 1;

    train::TrainConfig cfg;
    cfg.total_iters = 20;
    cfg.batch = 2;
    cfg.patch_size = 16;
    cfg.seed = 77;
    cfg.log_interval = 2;
    cfg.checkpoint_interval = 10;

    deg::DegradationConfig dcfg;
    dcfg.noise_max = 10.0 / 255.0;

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };

    train::FitOptions opts;
    opts.degradation = dcfg;
    opts.channel_mode = data::ChannelMode::Grayscale;
    opts.checkpoint_dir = tmp.root / "run_a";
    opts.metric_log = tmp.root / "run_a.log";
    train::TrainState a = train::fit(corpus, spec, cfg, opts);

    opts.checkpoint_dir = tmp.root / "run_b";
    opts.metric_log = tmp.root / "run_b.log";
    train::TrainState b = train::fit(corpus, spec, cfg, opts);

    c.expect(slurp(tmp.root / "run_a.log") == slurp(tmp.root / "run_b.log"),
             "metric logs differ across executions");
    bool same = true;
    for (size_t i = 0; same && i < a.params.named.size(); ++i)
        for (int64_t k = 0; same && k < a.params.named[i].second.size(); ++k)
            same = a.params.named[i].second[k] == b.params.named[i].second[k];
    c.expect(same, "final parameters differ across executions");

    // checkpoint round trip is bit-exact
    train::save_checkpoint(a, tmp.root / "rt.ckpt");
    train::TrainState rt = train::load_checkpoint(tmp.root / "rt.ckpt");
    bool exact = rt.iter == a.iter;
    for (size_t i = 0; exact && i < a.params.named.size(); ++i)
        for (int64_t k = 0; exact && k < a.params.named[i].second.size(); ++k)
            exact = rt.params.named[i].second[k] == a.params.named[i].second[k] &&
                    rt.moment1[i][k] == a.moment1[i][k] && rt.moment2[i][k] == a.moment2[i][k];
    c.expect(exact, "checkpoint round trip not bit-exact");

    // kill at iter 10, resume, compare with the uninterrupted run
    opts.checkpoint_dir = tmp.root / "run_c";
    opts.metric_log = tmp.root / "run_c.log";
    opts.stop_after = 10;
    train::fit(corpus, spec, cfg, opts);
    opts.stop_after = 0;
    opts.resume_from = opts.checkpoint_dir / "last.ckpt";
    train::TrainState resumed = train::fit(corpus, spec, cfg, opts);
    bool match = resumed.iter == a.iter;
    for (size_t i = 0; match && i < a.params.named.size(); ++i)
        for (int64_t k = 0; match && k < a.params.named[i].second.size(); ++k)
            match = resumed.params.named[i].second[k] == a.params.named[i].second[k];
    c.expect(match, "kill-resume diverges from the uninterrupted run");
    c.expect(slurp(tmp.root / "run_c.log") == slurp(tmp.root / "run_a.log"),
             "kill-resume metric log differs");
}

}  // namespace

int main() {
    std::printf("acceptance gate\n");
    criterion_1_blur_oracle();
    criterion_2_kernel_properties();
    criterion_3_gradients();
    criterion_4_shapes();
    criterion_5_identity_residual();
    criterion_6_overfit();

    {
        TempDir tmp("trend");
        write_corpus(tmp.root / "train", 32, 64, 700);
        write_corpus(tmp.root / "val", 4, 64, 800);
        data::Corpus train_corpus = data::scan_corpus(tmp.root, "train");
        data::Corpus val_corpus = data::scan_corpus(tmp.root, "val");
        criterion_7_trend(train_corpus, val_corpus);
        criterion_8_sigma_range(train_corpus, val_corpus);
    }

    criterion_9_psnr_closed_form();
    criterion_10_lucy_richardson();
    criterion_11_reproducibility();

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
