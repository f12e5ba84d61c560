// Copyright 2026 The Vitiseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vitiseg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "vitiseg/errors.hpp"

namespace vitiseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// The handler records the message and returns; libpng then longjmps back to
// the setjmp site, where we rethrow as DataError. Exceptions must not cross
// libpng's C frames.
void record_error(png_structp png, png_const_charp msg) {
  std::string* sink = static_cast<std::string*>(png_get_error_ptr(png));
  if (sink && sink->empty()) *sink = msg;
}

void ignore_warning(png_structp, png_const_charp) {}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;

  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, record_error,
                                 ignore_warning);
    if (png) info = png_create_info_struct(png);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;

  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, record_error,
                                  ignore_warning);
    if (png) info = png_create_info_struct(png);
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

[[noreturn]] void fail(const std::string& path, const std::string& detail) {
  throw DataError("PNG error in '" + path + "': " +
                  (detail.empty() ? "decode failed" : detail));
}

/// Decodes any supported 8-bit PNG to interleaved RGB.
RasterImage decode_rgb(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open '" + path + "' for reading");

  PngReader reader;
  if (!reader.png || !reader.info) fail(path, "allocation failed");

  RasterImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(reader.png))) fail(path, reader.error);

  png_init_io(reader.png, file.get());
  png_read_info(reader.png, reader.info);

  const png_uint_32 width = png_get_image_width(reader.png, reader.info);
  const png_uint_32 height = png_get_image_height(reader.png, reader.info);
  const int depth = png_get_bit_depth(reader.png, reader.info);
  const int color = png_get_color_type(reader.png, reader.info);
  if (depth == 16) {
    throw DataError("PNG error in '" + path + "': 16-bit depth unsupported (8-bit only)");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(reader.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(reader.png);
  if (png_get_valid(reader.png, reader.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(reader.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(reader.png);
  }
  png_set_strip_alpha(reader.png);
  if (depth < 8) png_set_packing(reader.png);
  png_read_update_info(reader.png, reader.info);

  if (png_get_rowbytes(reader.png, reader.info) != width * 3) {
    throw DataError("PNG error in '" + path + "': unexpected decoded layout");
  }
  img = RasterImage(static_cast<int>(width), static_cast<int>(height));
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(reader.png, rows.data());
  png_read_end(reader.png, nullptr);
  return img;
}

}  // namespace

RasterImage load_image(const std::string& path) { return decode_rgb(path); }

MaskImage load_mask(const std::string& path) {
  RasterImage rgb = decode_rgb(path);
  MaskImage mask(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const Real lum =
          0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
      mask.at(x, y) = static_cast<std::uint8_t>(std::floor(lum + 0.5));
    }
  }
  return mask;
}

void save_image(const RasterImage& img, const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path + "' for writing");

  PngWriter writer;
  if (!writer.png || !writer.info) fail(path, "allocation failed");
  if (setjmp(png_jmpbuf(writer.png))) fail(path, writer.error);

  png_init_io(writer.png, file.get());
  png_set_IHDR(writer.png, writer.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(writer.png, writer.info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(writer.png, const_cast<png_bytep>(img.pixels.data() +
                                                    static_cast<std::size_t>(y) * img.width * 3));
  }
  png_write_end(writer.png, nullptr);
}

void save_mask(const MaskImage& mask, const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path + "' for writing");

  PngWriter writer;
  if (!writer.png || !writer.info) fail(path, "allocation failed");
  if (setjmp(png_jmpbuf(writer.png))) fail(path, writer.error);

  png_init_io(writer.png, file.get());
  png_set_IHDR(writer.png, writer.info, static_cast<png_uint_32>(mask.width),
               static_cast<png_uint_32>(mask.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(writer.png, writer.info);
  for (int y = 0; y < mask.height; ++y) {
    png_write_row(writer.png, const_cast<png_bytep>(mask.pixels.data() +
                                                    static_cast<std::size_t>(y) * mask.width));
  }
  png_write_end(writer.png, nullptr);
}

}  // namespace vitiseg
