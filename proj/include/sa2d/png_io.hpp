#pragma once

#include <filesystem>
#include <vector>

#include "sa2d/image.hpp"

namespace sa2d {

enum class ChannelMode { grayscale, rgb };

// 8-bit grayscale PNG; values quantized round-half-up.
void write_png_gray(const std::filesystem::path& path, const Image& img);

// Interleaved 8-bit RGB rows, used by the plot writer.
void write_png_rgb(const std::filesystem::path& path, int h, int w,
                   const std::vector<unsigned char>& rgb);

// Loads an 8-bit PNG. Color inputs are reduced to luma (Rec.601) under
// grayscale mode; rgb mode keeps three planes.
Image read_png_gray(const std::filesystem::path& path);
std::vector<Image> read_png(const std::filesystem::path& path, ChannelMode mode);

}  // namespace sa2d
