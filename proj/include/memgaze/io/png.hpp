#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace memgaze::io {

// Minimal zlib-backed PNG writers. Pixel data is row-major, top row first.
void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);
void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);

}  // namespace memgaze::io
