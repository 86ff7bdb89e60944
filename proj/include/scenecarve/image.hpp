#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace scenecarve {

/// Interleaved 8-bit RGB, row-major, origin top-left.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(std::size_t(w) * h * 3, 0) {}

  bool empty() const { return width == 0 || height == 0; }
  std::uint8_t* at(int x, int y) { return &data[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &data[(std::size_t(y) * width + x) * 3];
  }
};

// rows index y, cols index x.
using GrayImage = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

GrayImage to_gray(const RgbImage& image);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Writes a binary mask as an 8-bit grayscale PNG (0 / 255).
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
/// Any non-zero channel counts as set.
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace scenecarve
