#include "semcom/image_io.hpp"

#include "semcom/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace semcom {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  int h = 0;
  int w = 0;
  int channels = 0;
  std::vector<unsigned char> data;
};

RawPng read_raw(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  RawPng raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("invalid PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);
  raw.w = static_cast<int>(png_get_image_width(png, info));
  raw.h = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.data.resize(stride * raw.h);
  std::vector<png_bytep> rows(raw.h);
  for (int y = 0; y < raw.h; ++y) rows[y] = raw.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_raw(const std::filesystem::path& path, const unsigned char* data, int h, int w, int channels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::vector<unsigned char> to_bytes(const Image& img) {
  std::vector<unsigned char> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

Image from_bytes(const unsigned char* rgb, int h, int w) {
  Image img(h, w);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = rgb[i] / 255.0;
  return img;
}

Image read_png_rgb(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  Image img(raw.h, raw.w);
  for (int y = 0; y < raw.h; ++y) {
    for (int x = 0; x < raw.w; ++x) {
      const unsigned char* px = raw.data.data() + (static_cast<std::size_t>(y) * raw.w + x) * raw.channels;
      for (int ch = 0; ch < 3; ++ch) {
        const int src = raw.channels >= 3 ? ch : 0;
        img.at(y, x, ch) = px[src] / 255.0;
      }
    }
  }
  return img;
}

LabelMap read_png_gray(const std::filesystem::path& path) {
  const RawPng raw = read_raw(path);
  if (raw.channels != 1) throw DataError("expected a single-channel PNG: " + path.string());
  LabelMap out(raw.h, raw.w);
  std::copy(raw.data.begin(), raw.data.end(), out.labels.begin());
  return out;
}

void write_png_rgb(const std::filesystem::path& path, const Image& img) {
  const auto bytes = to_bytes(img);
  write_raw(path, bytes.data(), img.h, img.w, 3);
}

void write_png_gray(const std::filesystem::path& path, const LabelMap& labels) {
  write_raw(path, labels.labels.data(), labels.h, labels.w, 1);
}

}  // namespace semcom
