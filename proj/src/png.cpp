#include "memgaze/io/png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace memgaze::io {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
  put_u32(out, (std::uint32_t)data.size());
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc =
      crc32(0, out.data() + start, (uInt)(out.size() - start));
  put_u32(out, crc);
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
  if ((int)pixels.size() != width * height * channels)
    throw std::invalid_argument("write_png: pixel buffer size mismatch");

  std::vector<std::uint8_t> raw;
  raw.reserve((size_t)height * (width * channels + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    const std::uint8_t* row = pixels.data() + (size_t)y * width * channels;
    raw.insert(raw.end(), row, row + (size_t)width * channels);
  }
  uLongf clen = compressBound((uLong)raw.size());
  std::vector<std::uint8_t> compressed(clen);
  if (compress2(compressed.data(), &clen, raw.data(), (uLong)raw.size(), 6) !=
      Z_OK)
    throw std::runtime_error("write_png: deflate failed");
  compressed.resize(clen);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, (std::uint32_t)width);
  put_u32(ihdr, (std::uint32_t)height);
  ihdr.push_back(8);                              // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);          // gray / truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  f.write((const char*)out.data(), (std::streamsize)out.size());
  if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

}  // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
  write_png(path, width, height, 1, pixels);
}

void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
  write_png(path, width, height, 3, pixels);
}

}  // namespace memgaze::io
