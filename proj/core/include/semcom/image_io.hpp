#pragma once

#include "semcom/types.hpp"

#include <filesystem>
#include <vector>

namespace semcom {

// 8-bit PNG I/O. RGB(A)/gray images are converted to normalised RGB.
Image read_png_rgb(const std::filesystem::path& path);
// Single-channel 8-bit PNG as raw values.
LabelMap read_png_gray(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& img);
void write_png_gray(const std::filesystem::path& path, const LabelMap& labels);

// Quantises [0,1] values to 8 bits (round to nearest, clamped).
std::vector<unsigned char> to_bytes(const Image& img);
Image from_bytes(const unsigned char* rgb, int h, int w);

}  // namespace semcom
