#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cocopipe/errors.hpp"

namespace cocopipe {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct ImageRaster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const ImageRaster&) const = default;
};

// Decodes PNG or JPEG, detected by magic bytes. Alpha is stripped; palette
// and sub-8-bit images are expanded, 16-bit samples reduced to 8.
ImageRaster read_image(const std::string& path);

// Encodes by file extension: .png, or .jpg/.jpeg at quality 95.
void write_image(const std::string& path, const ImageRaster& image);

}  // namespace cocopipe
