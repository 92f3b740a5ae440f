#pragma once

#include "semcom/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace semcom {

// Baseline JPEG (libjpeg), 4:2:0 chroma subsampling as the library defaults.
std::vector<std::uint8_t> jpeg_encode(const Image& img, int quality);
// nullopt when the stream is corrupt (any libjpeg error or warning) or its
// dimensions differ from expected_h x expected_w (pass 0 to accept any).
std::optional<Image> jpeg_decode(std::span<const std::uint8_t> bytes, int expected_h = 0, int expected_w = 0);

struct JpegRound {
  std::vector<std::uint8_t> bytes;
  Image reconstructed;
};
JpegRound jpeg_round(const Image& img, int quality);

// Highest quality whose stream fits max_bytes (quality 1 if none fits).
int jpeg_quality_for_budget(const Image& img, std::size_t max_bytes);

}  // namespace semcom
