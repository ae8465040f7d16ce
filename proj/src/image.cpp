#include "jsr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace jsr::img {

namespace {

int next_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns the next integer.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    return v;
}

}  // namespace

bool has_supported_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

ImageTensor load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    int64_t channels;
    if (magic[0] == 'P' && magic[1] == '5')
        channels = 1;
    else if (magic[0] == 'P' && magic[1] == '6')
        channels = 3;
    else
        throw DataError("unsupported image format (want binary PGM/PPM): " + path.string());
    const int64_t w = next_token(in);
    const int64_t h = next_token(in);
    const int maxval = next_token(in);
    if (w < 1 || h < 1 || (maxval != 255 && maxval != 65535))
        throw DataError("bad PNM header in " + path.string());
    in.get();  // single whitespace after maxval
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const int64_t samples = w * h * channels;
    std::vector<unsigned char> raw(static_cast<size_t>(samples * bytes_per_sample));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw DataError("truncated image payload in " + path.string());

    ImageTensor out({channels, h, w});
    const double inv = 1.0 / static_cast<double>(maxval);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < channels; ++c) {
                const size_t i = static_cast<size_t>(((y * w + x) * channels + c) * bytes_per_sample);
                int v = raw[i];
                if (bytes_per_sample == 2) v = (v << 8) | raw[i + 1];  // big-endian per PNM
                out.at3(c, y, x) = v * inv;
            }
    return out;
}

void save(const std::filesystem::path& path, const ImageTensor& image, int bits) {
    if (image.ndim() != 3) throw InvalidParameter("save expects a (C,H,W) image");
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (C != 1 && C != 3) throw InvalidParameter("save supports 1 or 3 channels");
    if (bits != 8 && bits != 16) throw InvalidParameter("bits must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    const int maxval = bits == 16 ? 65535 : 255;
    out << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n" << maxval << "\n";
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < C; ++c) {
                const double v = std::clamp(image.at3(c, y, x), 0.0, 1.0);
                const int q = static_cast<int>(std::lround(v * maxval));
                if (bits == 16) out.put(static_cast<char>((q >> 8) & 0xff));
                out.put(static_cast<char>(q & 0xff));
            }
    if (!out) throw DataError("write failed: " + path.string());
}

ImageTensor to_grayscale(const ImageTensor& image) {
    if (image.dim(0) == 1) return image;
    if (image.dim(0) != 3) throw InvalidParameter("to_grayscale expects 1 or 3 channels");
    const int64_t H = image.dim(1), W = image.dim(2);
    ImageTensor out({1, H, W});
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            out.at3(0, y, x) = 0.299 * image.at3(0, y, x) + 0.587 * image.at3(1, y, x) +
                               0.114 * image.at3(2, y, x);
    return out;
}

ImageTensor replicate_channels(const ImageTensor& image, int64_t n) {
    if (image.dim(0) != 1) throw InvalidParameter("replicate_channels expects 1 channel");
    const int64_t H = image.dim(1), W = image.dim(2);
    ImageTensor out({n, H, W});
    for (int64_t c = 0; c < n; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) out.at3(c, y, x) = image.at3(0, y, x);
    return out;
}

ImageTensor average_channels(const ImageTensor& image) {
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    ImageTensor out({1, H, W});
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int64_t c = 0; c < C; ++c) acc += image.at3(c, y, x);
            out.at3(0, y, x) = acc / static_cast<double>(C);
        }
    return out;
}

}  // namespace jsr::img
