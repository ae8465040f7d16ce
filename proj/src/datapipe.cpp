#include "jsr/datapipe.hpp"

#include <algorithm>

#include "jsr/image.hpp"

namespace jsr::data {

namespace fs = std::filesystem;

Corpus scan_corpus(const fs::path& root, const std::string& split) {
    Corpus corpus;
    corpus.root = root;
    corpus.split = split;
    const fs::path dir = root / split;
    if (!fs::exists(dir)) throw EmptyCorpus("corpus directory does not exist: " + dir.string());
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && img::has_supported_extension(entry.path()))
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        try {
            ImageTensor t = img::load(p);
            corpus.records.push_back({p, t.dim(0), t.dim(1), t.dim(2)});
        } catch (const std::exception& e) {
            corpus.failures.emplace_back(p.string(), e.what());
        }
    }
    if (corpus.records.empty())
        throw EmptyCorpus("no decodable images under " + dir.string() +
                          (corpus.failures.empty()
                               ? ""
                               : " (" + std::to_string(corpus.failures.size()) + " failed)"));
    return corpus;
}

ImageTensor random_crop(const ImageTensor& hr, int64_t size, SeededRng& rng) {
    const int64_t C = hr.dim(0), H = hr.dim(1), W = hr.dim(2);
    if (H < size || W < size)
        throw InvalidParameter("image " + hr.shape_str() + " smaller than crop size " +
                               std::to_string(size));
    const int64_t oy = H == size ? 0 : static_cast<int64_t>(rng.uniform_int(H - size + 1));
    const int64_t ox = W == size ? 0 : static_cast<int64_t>(rng.uniform_int(W - size + 1));
    ImageTensor out({C, size, size});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) out.at3(c, y, x) = hr.at3(c, oy + y, ox + x);
    return out;
}

namespace {

ImageTensor rotate90(const ImageTensor& im, int64_t quarter_turns) {
    const int64_t C = im.dim(0), H = im.dim(1), W = im.dim(2);
    ImageTensor out({C, H, W});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                int64_t sy = y, sx = x;
                switch (quarter_turns & 3) {
                    case 1: sy = x; sx = H - 1 - y; break;
                    case 2: sy = H - 1 - y; sx = W - 1 - x; break;
                    case 3: sy = W - 1 - x; sx = y; break;
                    default: break;
                }
                out.at3(c, y, x) = im.at3(c, sy, sx);
            }
    return out;
}

ImageTensor flip_horizontal(const ImageTensor& im) {
    const int64_t C = im.dim(0), H = im.dim(1), W = im.dim(2);
    ImageTensor out({C, H, W});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) out.at3(c, y, x) = im.at3(c, y, W - 1 - x);
    return out;
}

}  // namespace

ImageTensor augment(const ImageTensor& hr, SeededRng& rng) {
    const bool do_flip = rng.uniform() < 0.5;
    const bool do_rotate = rng.uniform() < 0.5;
    const int64_t quarter_turns = 1 + static_cast<int64_t>(rng.uniform_int(3));
    if (do_rotate && hr.dim(1) != hr.dim(2))
        throw InvalidParameter("rotation requires a square image, got " + hr.shape_str());
    ImageTensor out = hr;
    if (do_flip) out = flip_horizontal(out);
    if (do_rotate) out = rotate90(out, quarter_turns);
    return out;
}

ImageTensor load_for_mode(const ImageRecord& rec, ChannelMode mode) {
    ImageTensor t = img::load(rec.path);
    if (mode == ChannelMode::Grayscale) return img::to_grayscale(t);
    if (t.dim(0) == 1) return img::replicate_channels(t, 3);
    return t;
}

PatchPair draw_pair(const Corpus& corpus, const deg::DegradationConfig& cfg, int64_t patch_size,
                    ChannelMode mode, SeededRng& rng) {
    if (corpus.records.empty()) throw EmptyCorpus("empty corpus");
    if (patch_size % cfg.scale != 0)
        throw InvalidParameter("patch size must be divisible by the scale factor");
    PatchPair pair;
    pair.image_index = static_cast<size_t>(rng.uniform_int(corpus.records.size()));
    ImageTensor full = load_for_mode(corpus.records[pair.image_index], mode);
    pair.hr = augment(random_crop(full, patch_size, rng), rng);
    pair.lr = deg::degrade(pair.hr, cfg, rng, pair.meta);
    return pair;
}

void next_batch(const Corpus& corpus, const deg::DegradationConfig& cfg, int64_t batch,
                int64_t patch_size, ChannelMode mode, SeededRng& rng, Tensor& lr_batch,
                Tensor& hr_batch) {
    if (batch < 1) throw InvalidParameter("batch must be >= 1");
    const int64_t lr_size = patch_size / cfg.scale;
    for (int64_t i = 0; i < batch; ++i) {
        PatchPair pair = draw_pair(corpus, cfg, patch_size, mode, rng);
        if (i == 0) {
            const int64_t C = pair.hr.dim(0);
            hr_batch = Tensor({batch, C, patch_size, patch_size});
            lr_batch = Tensor({batch, C, lr_size, lr_size});
        }
        std::copy_n(pair.hr.data(), pair.hr.size(), hr_batch.data() + i * pair.hr.size());
        std::copy_n(pair.lr.data(), pair.lr.size(), lr_batch.data() + i * pair.lr.size());
    }
}

}  // namespace jsr::data
