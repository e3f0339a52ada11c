// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "glitchqa/image.hpp"

namespace glitchqa {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::uint64_t image_hash(const Image& img) {
  std::uint8_t dims[8];
  for (int i = 0; i < 4; ++i) {
    dims[i] = static_cast<std::uint8_t>(img.width >> (8 * i));
    dims[4 + i] = static_cast<std::uint8_t>(img.height >> (8 * i));
  }
  return fnv1a64(img.pixels, fnv1a64(dims));
}

namespace {

struct PngImage {
  png_image img{};
  PngImage() { img.version = PNG_IMAGE_VERSION; }
  ~PngImage() { png_image_free(&img); }
};

std::vector<std::uint8_t> read_png_as(const std::filesystem::path& path, png_uint_32 format,
                                      int& width, int& height) {
  PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.c_str())) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + p.img.message);
  }
  p.img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + p.img.message);
  }
  width = static_cast<int>(p.img.width);
  height = static_cast<int>(p.img.height);
  return buf;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  Image out;
  out.pixels = read_png_as(path, PNG_FORMAT_RGB, out.width, out.height);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  PngImage p;
  p.img.width = static_cast<png_uint_32>(img.width);
  p.img.height = static_cast<png_uint_32>(img.height);
  p.img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&p.img, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + p.img.message);
  }
}

Mask read_mask_png(const std::filesystem::path& path) {
  Mask m;
  auto gray = read_png_as(path, PNG_FORMAT_GRAY, m.width, m.height);
  m.bits.resize(gray.size());
  std::transform(gray.begin(), gray.end(), m.bits.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v > 127 ? 1 : 0); });
  return m;
}

namespace {

// libpng longjmps on error; keep C++ objects out of this frame.
bool write_gray1(FILE* fp, int width, int height, const std::uint8_t* packed, std::size_t stride) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 1,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) png_write_row(png, packed + static_cast<std::size_t>(y) * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  const std::size_t stride = static_cast<std::size_t>((mask.width + 7) / 8);
  std::vector<std::uint8_t> packed(stride * static_cast<std::size_t>(mask.height), 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) packed[y * stride + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    }
  }
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
  if (!write_gray1(fp.get(), mask.width, mask.height, packed.data(), stride)) {
    throw IoError("cannot write PNG '" + path.string() + "'");
  }
}

Image center_crop_resize(const Image& src, int width, int height) {
  if (src.width <= 0 || src.height <= 0) throw ShapeError("empty source image");
  if (width <= 0 || height <= 0) throw ParameterError("target size must be positive");

  // Largest centered crop with the target aspect.
  double crop_w = src.width;
  double crop_h = src.height;
  const double target_aspect = static_cast<double>(width) / height;
  if (crop_w / crop_h > target_aspect) {
    crop_w = crop_h * target_aspect;
  } else {
    crop_h = crop_w / target_aspect;
  }
  const double x0 = (src.width - crop_w) / 2.0;
  const double y0 = (src.height - crop_h) / 2.0;
  const double sx = crop_w / width;
  const double sy = crop_h / height;

  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp(y0 + (y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int iy0 = static_cast<int>(fy);
    const int iy1 = std::min(iy0 + 1, src.height - 1);
    const double ty = fy - iy0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp(x0 + (x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int ix0 = static_cast<int>(fx);
      const int ix1 = std::min(ix0 + 1, src.width - 1);
      const double tx = fx - ix0;
      for (int ch = 0; ch < 3; ++ch) {
        const double a = src.pixels[src.offset(ix0, iy0) + ch];
        const double b = src.pixels[src.offset(ix1, iy0) + ch];
        const double c = src.pixels[src.offset(ix0, iy1) + ch];
        const double d = src.pixels[src.offset(ix1, iy1) + ch];
        const double v = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
        out.pixels[out.offset(x, y) + ch] =
            static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace glitchqa
