#include "bt/image_io.hpp"

#include "bt/error.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace bt {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

/// Decoded image with 1 or 3 channels of 8 or 16 bits, rows packed.
struct Raw {
  int width = 0, height = 0, channels = 0, depth = 0;
  std::vector<std::uint8_t> bytes;
};

Raw read_png(const std::filesystem::path& path, bool want_16) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw DataError(path.string() + " is not a PNG");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed for " + path.string());
  }
  Raw raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (!want_16 && bit_depth == 16) png_set_strip_16(png);
  if (want_16 && bit_depth == 16) png_set_swap(png);  // host little-endian
  png_read_update_info(png, info);

  raw.width = int(png_get_image_width(png, info));
  raw.height = int(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  std::vector<png_bytep> rows(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = raw.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = std::size_t(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * y));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ColorImage read_color_png(const std::filesystem::path& path) {
  const Raw raw = read_png(path, false);
  ColorImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (raw.channels >= 3) {
      img.data[i] = {raw.bytes[3 * i], raw.bytes[3 * i + 1], raw.bytes[3 * i + 2]};
    } else {
      const auto g = raw.bytes[raw.channels * i];
      img.data[i] = {g, g, g};
    }
  }
  return img;
}

void write_color_png(const std::filesystem::path& path, const ColorImage& img) {
  std::vector<std::uint8_t> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = img.data[i][c];
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, bytes);
}

DepthMap read_depth_png(const std::filesystem::path& path) {
  const Raw raw = read_png(path, true);
  if (raw.channels != 1 || raw.depth != 16) throw DataError(path.string() + " is not a 16-bit grayscale PNG");
  DepthMap depth(raw.width, raw.height);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const std::uint16_t mm = std::uint16_t(raw.bytes[2 * i] | (raw.bytes[2 * i + 1] << 8));
    depth.data[i] = mm / 1000.0;
  }
  return depth;
}

void write_depth_png(const std::filesystem::path& path, const DepthMap& depth) {
  std::vector<std::uint8_t> bytes(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double mm = std::round(double(depth.data[i]) * 1000.0);
    const auto v = static_cast<std::uint16_t>(std::clamp(std::isfinite(mm) ? mm : 0.0, 0.0, 65535.0));
    bytes[2 * i] = std::uint8_t(v & 0xff);
    bytes[2 * i + 1] = std::uint8_t(v >> 8);
  }
  write_png(path, depth.width, depth.height, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

Mask read_mask_png(const std::filesystem::path& path) {
  const Raw raw = read_png(path, false);
  Mask mask(raw.width, raw.height);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    bool on = false;
    for (int c = 0; c < raw.channels; ++c) on = on || raw.bytes[raw.channels * i + c] != 0;
    mask.data[i] = on ? 1 : 0;
  }
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  write_png(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 8, bytes);
}

}  // namespace bt
