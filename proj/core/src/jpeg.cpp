#include "semcom/jpeg.hpp"

#include "semcom/error.hpp"
#include "semcom/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstdlib>

#include <jpeglib.h>

namespace semcom {

namespace {

struct ErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  bool warned = false;
};

void on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<ErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

void on_message(j_common_ptr cinfo, int level) {
  if (level < 0) reinterpret_cast<ErrorManager*>(cinfo->err)->warned = true;
}

void silent_output(j_common_ptr) {}

}  // namespace

std::vector<std::uint8_t> jpeg_encode(const Image& img, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("JPEG quality must be in [1, 100]");
  if (img.h <= 0 || img.w <= 0) throw ContractError("jpeg_encode: empty image");
  const auto rgb = to_bytes(img);

  jpeg_compress_struct cinfo{};
  ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_error;
  err.pub.output_message = silent_output;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw DataError("JPEG encoding failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.w);
  cinfo.image_height = static_cast<JDIMENSION>(img.h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.w * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

std::optional<Image> jpeg_decode(std::span<const std::uint8_t> bytes, int expected_h, int expected_w) {
  if (bytes.empty()) return std::nullopt;
  jpeg_decompress_struct cinfo{};
  ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_error;
  err.pub.emit_message = on_message;
  err.pub.output_message = silent_output;
  std::vector<unsigned char> rgb;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return std::nullopt;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  if (jpeg_read_header(&cinfo, TRUE) != JPEG_HEADER_OK) {
    jpeg_destroy_decompress(&cinfo);
    return std::nullopt;
  }
  const int h = static_cast<int>(cinfo.image_height);
  const int w = static_cast<int>(cinfo.image_width);
  if ((expected_h > 0 && h != expected_h) || (expected_w > 0 && w != expected_w) || h <= 0 || w <= 0) {
    jpeg_destroy_decompress(&cinfo);
    return std::nullopt;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  if (cinfo.output_components != 3) {
    jpeg_destroy_decompress(&cinfo);
    return std::nullopt;
  }
  rgb.resize(static_cast<std::size_t>(h) * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPLE* row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (err.warned) return std::nullopt;
  return from_bytes(rgb.data(), h, w);
}

JpegRound jpeg_round(const Image& img, int quality) {
  JpegRound r;
  r.bytes = jpeg_encode(img, quality);
  auto dec = jpeg_decode(r.bytes, img.h, img.w);
  if (!dec) throw DataError("JPEG round trip failed to decode its own stream");
  r.reconstructed = std::move(*dec);
  return r;
}

int jpeg_quality_for_budget(const Image& img, std::size_t max_bytes) {
  int lo = 1;
  int hi = 100;
  int best = 1;
  while (lo <= hi) {
    const int mid = (lo + hi) / 2;
    if (jpeg_encode(img, mid).size() <= max_bytes) {
      best = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  return best;
}

}  // namespace semcom
