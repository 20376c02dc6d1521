#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "c2am/types.hpp"

namespace c2am {

// Interleaved 8-bit RGB.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int r, int c, int ch) { return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  [[nodiscard]] std::uint8_t at(int r, int c, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
};

// PNG (any color type, expanded to RGB) or baseline JPEG, chosen by file signature.
RgbImage read_image(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);

void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path);

// Label maps: palette PNGs return raw indices, grayscale PNGs return values.
Grid<int> read_label_png(const std::filesystem::path& path);
// Indexed PNG with the usual VOC color palette; labels must be in [0, 255].
void write_label_png(const std::filesystem::path& path, const Grid<int>& labels);

}  // namespace c2am
