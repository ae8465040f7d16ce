#pragma once

#include <filesystem>
#include <string>

#include "jsr/tensor.hpp"

namespace jsr::img {

/// Loads a binary PGM (P5) or PPM (P6) file, 8- or 16-bit, into a (C,H,W)
/// tensor scaled to [0,1]. Throws DataError on undecodable input.
ImageTensor load(const std::filesystem::path& path);

/// Writes a (1,H,W) image as PGM or a (3,H,W) image as PPM. 16-bit when
/// `bits` is 16, otherwise 8-bit. Values are clamped to [0,1] and rounded.
void save(const std::filesystem::path& path, const ImageTensor& image, int bits = 8);

/// ITU-R BT.601 luminance; (3,H,W) -> (1,H,W). Identity on single-channel.
ImageTensor to_grayscale(const ImageTensor& image);

/// Replicates a single channel to n channels.
ImageTensor replicate_channels(const ImageTensor& image, int64_t n);

/// Averages channels down to one.
ImageTensor average_channels(const ImageTensor& image);

bool has_supported_extension(const std::filesystem::path& path);

}  // namespace jsr::img
