#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace outfit {

/// Planar RGB raster (channel-major, then row-major), values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * height * width

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0.0f) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

/// Decodes a PNG or JPEG file (detected from the magic bytes).
Image read_image(const std::filesystem::path& path);

/// Bilinear resample to exactly `width` x `height`, sampling at pixel centers.
Image resize_bilinear(const Image& src, int width, int height);

std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace outfit
