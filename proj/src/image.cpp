// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "cmgan/error.hpp"

namespace cmgan {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t quantize(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.height <= 0 || img.width <= 0) throw IoError("cannot write an empty image to " + path);
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<uint8_t> row(static_cast<size_t>(img.width));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) row[static_cast<size_t>(x)] = quantize(img.at(y, x));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  uint8_t sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw IoError(path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  Image img;
  std::vector<uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const png_byte color = png_get_color_type(png, info);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  img = Image(png_get_image_height(png, info), png_get_image_width(png, info));
  row.resize(png_get_rowbytes(png, info));
  const int channels = png_get_channels(png, info);
  for (int64_t y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int64_t x = 0; x < img.width; ++x) img.at(y, x) = row[static_cast<size_t>(x * channels)] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

template <typename T>
Tensor<T> to_tensor(const Image& img) {
  Tensor<T> t(Shape{1, 1, img.height, img.width});
  for (size_t i = 0; i < img.size(); ++i) t[i] = static_cast<T>(img.pixels[i] * 2.0 - 1.0);
  return t;
}

template <typename T>
Image from_tensor(const Tensor<T>& t, int64_t index) {
  const Shape s = t.shape();
  if (s.c != 1 || index < 0 || index >= s.n) throw DimensionError("cannot extract image " + std::to_string(index) + " from " + s.str());
  Image img(s.h, s.w);
  const size_t base = static_cast<size_t>(index * s.h * s.w);
  for (size_t i = 0; i < img.size(); ++i) img.pixels[i] = std::clamp((double(t[base + i]) + 1.0) / 2.0, 0.0, 1.0);
  return img;
}

Image to_255(const Image& img) {
  Image out(img.height, img.width);
  for (size_t i = 0; i < img.size(); ++i) out.pixels[i] = quantize(img.pixels[i]);
  return out;
}

template Tensor<float> to_tensor(const Image&);
template Tensor<double> to_tensor(const Image&);
template Image from_tensor(const Tensor<float>&, int64_t);
template Image from_tensor(const Tensor<double>&, int64_t);

}  // namespace cmgan
