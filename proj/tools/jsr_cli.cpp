// jsr: THz-style image super-resolution toolkit.
//
// Subcommands: degrade, train, eval, infer, compare.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "jsr/config.hpp"
#include "jsr/evalkit.hpp"
#include "jsr/image.hpp"
#include "jsr/kernels.hpp"
#include "jsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace jsr;

namespace {

cfg::RunConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return cfg::RunConfig{};
    return cfg::RunConfig::load(config_path);
}

std::string fingerprint(const cfg::RunConfig& c) {
    std::ostringstream s;
    s << c.network.to_json() << "|s" << c.degradation.scale << "|a" << c.degradation.alpha << "|b"
      << c.degradation.beta << "|n" << c.degradation.noise_max << "|seed" << c.seed;
    const size_t h = std::hash<std::string>{}(s.str());
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

ImageTensor center_crop_multiple(const ImageTensor& im, int64_t multiple) {
    const int64_t C = im.dim(0);
    const int64_t H = (im.dim(1) / multiple) * multiple;
    const int64_t W = (im.dim(2) / multiple) * multiple;
    if (H < multiple || W < multiple)
        throw DataError("image " + im.shape_str() + " smaller than " + std::to_string(multiple));
    if (H == im.dim(1) && W == im.dim(2)) return im;
    ImageTensor out({C, H, W});
    const int64_t oy = (im.dim(1) - H) / 2, ox = (im.dim(2) - W) / 2;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) out.at3(c, y, x) = im.at3(c, oy + y, ox + x);
    return out;
}

ImageTensor reflect_pad_to_multiple(const ImageTensor& im, int64_t multiple) {
    const int64_t C = im.dim(0), H = im.dim(1), W = im.dim(2);
    const int64_t Hp = ((H + multiple - 1) / multiple) * multiple;
    const int64_t Wp = ((W + multiple - 1) / multiple) * multiple;
    if (Hp == H && Wp == W) return im;
    ImageTensor out({C, Hp, Wp});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < Hp; ++y)
            for (int64_t x = 0; x < Wp; ++x)
                out.at3(c, y, x) = im.at3(c, reflect_index(y, H), reflect_index(x, W));
    return out;
}

/// Runs a checkpointed model on an arbitrary-size image: reflect-pads to the
/// divisibility requirement, forwards, crops back to scale x original dims.
/// Grayscale input against an RGB model goes through channel replication and
/// output averaging.
ImageTensor super_resolve(const train::TrainState& state, const ImageTensor& input) {
    const auto& spec = state.spec;
    ImageTensor im = input;
    const bool gray_on_rgb = input.dim(0) == 1 && spec.in_channels == 3;
    if (gray_on_rgb)
        im = img::replicate_channels(im, 3);
    else if (input.dim(0) == 3 && spec.in_channels == 1)
        im = img::to_grayscale(im);
    const int64_t H = im.dim(1), W = im.dim(2);
    im = reflect_pad_to_multiple(im, spec.divisibility());
    Tensor batch({1, im.dim(0), im.dim(1), im.dim(2)}, im.vec());
    Tensor sr4 = net::forward(state.params, spec, batch);
    ImageTensor sr({sr4.dim(1), sr4.dim(2), sr4.dim(3)}, sr4.vec());
    const int64_t oh = H * spec.scale, ow = W * spec.scale;
    ImageTensor cropped({sr.dim(0), oh, ow});
    for (int64_t c = 0; c < sr.dim(0); ++c)
        for (int64_t y = 0; y < oh; ++y)
            for (int64_t x = 0; x < ow; ++x) cropped.at3(c, y, x) = sr.at3(c, y, x);
    for (auto& v : cropped.vec()) v = std::clamp(v, 0.0, 1.0);
    if (gray_on_rgb) return img::average_channels(cropped);
    return cropped;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::exists(dir)) throw DataError("directory does not exist: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && img::has_supported_extension(e.path()))
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_degrade(const std::string& config_path, const std::string& in_dir,
                const std::string& out_dir) {
    cfg::RunConfig c = load_config(config_path);
    const auto inputs = list_images(in_dir);
    if (inputs.empty()) throw DataError("no input images in " + in_dir);
    fs::create_directories(out_dir);
    double sigma_min = 1e300, sigma_max = -1e300;
    int failures = 0;
    size_t count = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        try {
            ImageTensor hr = img::load(inputs[i]);
            hr = center_crop_multiple(hr, c.degradation.scale);
            SeededRng rng = SeededRng::derive(c.seed, i);
            deg::DegradationMeta meta;
            ImageTensor lr = deg::degrade(hr, c.degradation, rng, meta);
            const fs::path out_img = fs::path(out_dir) / inputs[i].filename();
            img::save(out_img, lr, 16);
            std::ofstream side(out_img.string() + ".meta.txt");
            side << "source " << inputs[i].filename().string() << "\n"
                 << "sigma " << meta.sigma << "\n"
                 << "noise_std " << meta.noise_std << "\n"
                 << "noise_seed " << meta.seed << "\n"
                 << "scale " << c.degradation.scale << "\n";
            sigma_min = std::min(sigma_min, meta.sigma);
            sigma_max = std::max(sigma_max, meta.sigma);
            ++count;
        } catch (const std::exception& e) {
            std::cerr << "degrade: " << inputs[i].string() << ": " << e.what() << "\n";
            ++failures;
        }
    }
    std::cout << "degraded " << count << " image(s)";
    if (count > 0) std::cout << ", sigma range [" << sigma_min << ", " << sigma_max << "]";
    std::cout << "\n";
    if (failures > 0) {
        std::cerr << failures << " input(s) failed\n";
        return 2;
    }
    return 0;
}

int cmd_train(const std::string& config_path, bool resume) {
    cfg::RunConfig c = load_config(config_path);
    if (c.data_root.empty()) throw InvalidParameter("config paths.data_root is required");
    data::Corpus corpus = data::scan_corpus(c.data_root, c.train_split);
    for (const auto& [path, reason] : corpus.failures)
        std::cerr << "skipping undecodable " << path << ": " << reason << "\n";

    data::Corpus val;
    bool have_val = false;
    try {
        val = data::scan_corpus(c.data_root, c.val_split);
        have_val = true;
    } catch (const data::EmptyCorpus&) {
        std::cerr << "no validation split found; training without validation\n";
    }

    fs::create_directories(c.out_dir);
    train::FitOptions opts;
    opts.checkpoint_dir = c.out_dir / "checkpoints";
    opts.metric_log = c.out_dir / "metrics.log";
    opts.degradation = c.degradation;
    opts.channel_mode = c.channel_mode;
    if (have_val) opts.val_corpus = &val;
    const fs::path last = opts.checkpoint_dir / "last.ckpt";
    if (resume) {
        if (!fs::exists(last)) throw DataError("resume requested but no checkpoint at " +
                                               last.string());
        opts.resume_from = last;
    }
    train::TrainState st = train::fit(corpus, c.network, c.training, opts);
    std::cout << "trained to iter " << st.iter << "; final checkpoint at "
              << (opts.checkpoint_dir / "final.ckpt").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint,
             const std::string& val_dir, bool passthrough) {
    cfg::RunConfig c = load_config(config_path);
    train::TrainState state;
    if (!passthrough) state = train::load_checkpoint(checkpoint);
    const auto files = list_images(val_dir);
    if (files.empty()) throw DataError("no validation images in " + val_dir);

    const int64_t div = passthrough ? c.degradation.scale
                                    : state.spec.divisibility() * c.degradation.scale;
    std::vector<ImageTensor> lr_set, hr_set;
    std::vector<std::string> names;
    for (size_t i = 0; i < files.size(); ++i) {
        ImageTensor hr = img::load(files[i]);
        if (c.channel_mode == data::ChannelMode::Grayscale) hr = img::to_grayscale(hr);
        hr = center_crop_multiple(hr, div);
        SeededRng rng = SeededRng::derive(c.seed, i);
        deg::DegradationMeta meta;
        lr_set.push_back(deg::degrade(hr, c.degradation, rng, meta));
        hr_set.push_back(std::move(hr));
        names.push_back(files[i].filename().string());
    }

    std::vector<eval::Method> methods;
    if (passthrough) {
        methods.push_back({"ground-truth-passthrough",
                           [&](const ImageTensor&, size_t idx) { return hr_set[idx]; }});
    } else {
        methods.push_back({"model:" + to_string(state.spec.variant),
                           [&](const ImageTensor& lr, size_t) {
                               return super_resolve(state, lr);
                           }});
    }
    auto reports = eval::compare_methods(lr_set, hr_set, names, methods, fingerprint(c));
    fs::create_directories(c.out_dir);
    std::ofstream(c.out_dir / "eval_report.json") << eval::render_json(reports);
    std::ofstream(c.out_dir / "eval_report.txt") << eval::render_table(reports);
    std::cout << eval::render_table(reports);
    return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_in,
              const std::string& image_out, int bits) {
    train::TrainState state = train::load_checkpoint(checkpoint);
    ImageTensor in = img::load(image_in);
    ImageTensor sr = super_resolve(state, in);
    img::save(image_out, sr, bits);
    std::cout << "wrote " << image_out << " (" << sr.dim(2) << "x" << sr.dim(1) << ", "
              << sr.dim(0) << " channel(s))\n";
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& lr_dir,
                const std::string& hr_dir, const std::vector<std::string>& method_names,
                int lucy_iters, double lucy_sigma) {
    cfg::RunConfig c = load_config(config_path);
    const auto lr_files = list_images(lr_dir);
    const auto hr_files = list_images(hr_dir);
    std::vector<std::string> lr_names, hr_names;
    for (const auto& p : lr_files) lr_names.push_back(p.filename().string());
    for (const auto& p : hr_files) hr_names.push_back(p.filename().string());
    std::vector<std::string> missing;
    for (const auto& n : lr_names)
        if (std::find(hr_names.begin(), hr_names.end(), n) == hr_names.end())
            missing.push_back(n + " (no HR)");
    for (const auto& n : hr_names)
        if (std::find(lr_names.begin(), lr_names.end(), n) == lr_names.end())
            missing.push_back(n + " (no LR)");
    if (!missing.empty()) {
        std::cerr << "misaligned LR/HR sets; unmatched files:\n";
        for (const auto& m : missing) std::cerr << "  " << m << "\n";
        return 2;
    }
    if (lr_files.empty()) throw DataError("no images to compare in " + lr_dir);

    std::vector<ImageTensor> lr_set, hr_set;
    std::vector<std::string> names;
    for (size_t i = 0; i < lr_files.size(); ++i) {
        lr_set.push_back(img::load(lr_files[i]));
        hr_set.push_back(img::load(hr_dir / lr_files[i].filename()));
        names.push_back(lr_names[i]);
    }
    const int64_t scale = c.degradation.scale;

    // PSF width for Lucy-Richardson defaults to the midpoint of the
    // configured blur range unless given explicitly.
    const double psf_sigma =
        lucy_sigma > 0.0 ? lucy_sigma : 0.5 * (c.degradation.alpha + c.degradation.beta);

    std::vector<eval::Method> methods;
    std::vector<std::shared_ptr<train::TrainState>> states;  // keep alive
    for (const auto& name : method_names) {
        if (name == "bicubic") {
            methods.push_back({"bicubic", [scale](const ImageTensor& lr, size_t) {
                                   return eval::bicubic_resize(lr, scale,
                                                               eval::ResizeDirection::Up);
                               }});
        } else if (name == "lucy-richardson") {
            methods.push_back(
                {"lucy-richardson+bicubic", [scale, psf_sigma, lucy_iters](const ImageTensor& lr,
                                                                           size_t) {
                     // deconvolve first, then upscale
                     auto psf = deg::make_gaussian_kernel(psf_sigma,
                                                          deg::kernel_size_for_sigma(psf_sigma));
                     ImageTensor d = eval::lucy_richardson(lr, psf, lucy_iters);
                     for (auto& v : d.vec()) v = std::clamp(v, 0.0, 1.0);
                     return eval::bicubic_resize(d, scale, eval::ResizeDirection::Up);
                 }});
        } else if (name.rfind("checkpoint:", 0) == 0) {
            auto st = std::make_shared<train::TrainState>(
                train::load_checkpoint(name.substr(11)));
            states.push_back(st);
            methods.push_back({"model:" + to_string(st->spec.variant),
                               [st](const ImageTensor& lr, size_t) {
                                   return super_resolve(*st, lr);
                               }});
        } else if (name.rfind("external:", 0) == 0) {
            const fs::path dir = name.substr(9);
            for (const auto& n : names)
                if (!fs::exists(dir / n))
                    throw DataError("external method dir " + dir.string() +
                                    " is missing SR image " + n);
            methods.push_back({"external:" + dir.filename().string(),
                               [dir, names](const ImageTensor&, size_t idx) {
                                   return img::load(dir / names[idx]);
                               }});
        } else {
            throw InvalidParameter(
                "unknown method '" + name +
                "' (want bicubic | lucy-richardson | checkpoint:<path> | external:<dir>)");
        }
    }
    if (methods.empty()) throw InvalidParameter("no methods given");

    std::ostringstream fp;
    fp << fingerprint(c) << "|lucy_iters" << lucy_iters << "|lucy_sigma" << psf_sigma;
    auto reports = eval::compare_methods(lr_set, hr_set, names, methods, fp.str());
    fs::create_directories(c.out_dir);
    std::ofstream(c.out_dir / "compare_report.json") << eval::render_json(reports);
    std::cout << eval::render_table(reports);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"THz-style image super-resolution toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_dir, out_dir, checkpoint, val_dir, image_in, image_out;
    std::vector<std::string> method_names;
    bool resume = false, passthrough = false;
    int bits = 8, lucy_iters = 30;
    double lucy_sigma = 0.0;

    auto* degrade = app.add_subcommand("degrade", "Synthesize LR images from an HR directory");
    degrade->add_option("--config", config_path, "JSON config file");
    degrade->add_option("--in", in_dir, "input HR directory")->required();
    degrade->add_option("--out", out_dir, "output LR directory")->required();

    auto* tr = app.add_subcommand("train", "Train a network per the config");
    tr->add_option("--config", config_path, "JSON config file")->required();
    tr->add_flag("--resume", resume, "resume from the last checkpoint");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a validation directory");
    ev->add_option("--config", config_path, "JSON config file");
    ev->add_option("--checkpoint", checkpoint, "checkpoint file");
    ev->add_option("--val", val_dir, "validation HR directory")->required();
    ev->add_flag("--passthrough", passthrough, "feed HR as SR (sanity sentinel)");

    auto* in = app.add_subcommand("infer", "Super-resolve one image");
    in->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    in->add_option("--in", image_in, "input image")->required();
    in->add_option("--out", image_out, "output image")->required();
    in->add_option("--bits", bits, "output bit depth (8 or 16)");

    auto* cmp = app.add_subcommand("compare", "Compare methods on aligned LR/HR sets");
    cmp->add_option("--config", config_path, "JSON config file");
    cmp->add_option("--lr", in_dir, "LR directory")->required();
    cmp->add_option("--hr", out_dir, "HR directory")->required();
    cmp->add_option("--method", method_names,
                    "bicubic | lucy-richardson | checkpoint:<path> | external:<dir>")
        ->required();
    cmp->add_option("--lucy-iters", lucy_iters, "Lucy-Richardson iterations");
    cmp->add_option("--lucy-sigma", lucy_sigma, "Lucy-Richardson PSF sigma (0 = from config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*degrade) return cmd_degrade(config_path, in_dir, out_dir);
        if (*tr) return cmd_train(config_path, resume);
        if (*ev) {
            if (!passthrough && checkpoint.empty())
                throw InvalidParameter("eval requires --checkpoint (or --passthrough)");
            return cmd_eval(config_path, checkpoint, val_dir, passthrough);
        }
        if (*in) return cmd_infer(checkpoint, image_in, image_out, bits);
        if (*cmp)
            return cmd_compare(config_path, in_dir, out_dir, method_names, lucy_iters,
                               lucy_sigma);
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
