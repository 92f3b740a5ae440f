#pragma once

#include "semcom/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace semcom {

inline constexpr std::uint8_t kIgnoreLabel = 255;

// RGB image with values normalised to [0, 1], stored interleaved (y, x, channel).
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int height, int width) : h(height), w(width), pixels(static_cast<std::size_t>(height) * width * 3, 0.0) {}

  double& at(int y, int x, int ch) { return pixels[(static_cast<std::size_t>(y) * w + x) * 3 + ch]; }
  double at(int y, int x, int ch) const { return pixels[(static_cast<std::size_t>(y) * w + x) * 3 + ch]; }
  bool operator==(const Image&) const = default;
};

// Per-pixel class index in [0, n_cls) or kIgnoreLabel.
struct LabelMap {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int height, int width, std::uint8_t fill = 0)
      : h(height), w(width), labels(static_cast<std::size_t>(height) * width, fill) {}

  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * w + x]; }
  bool operator==(const LabelMap&) const = default;
};

struct Sample {
  Image image;
  LabelMap label;
};

// Stacks equally sized images into an (n, h, w, 3) tensor.
Tensor images_to_tensor(std::span<const Image> images);

}  // namespace semcom
