#include "fcnseg/voc_png.hpp"

#include <png.h>

#include <cmath>
#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace fcnseg {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() { png_destroy_write_struct(&png, &info); }
};

struct Decoded {
  int64_t width = 0, height = 0;
  int channels = 0;        // 1 = gray or palette indices, 3 = rgb
  bool paletted = false;
  std::vector<uint8_t> bytes;
  std::vector<std::array<uint8_t, 3>> palette;
};

Decoded read_png(const std::string& path, bool keep_palette) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image: " + path);

  PngRead ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw std::runtime_error("png: allocation failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("png: allocation failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw std::runtime_error("png: failed to decode " + path);

  png_init_io(ctx.png, f.get());
  png_read_info(ctx.png, ctx.info);

  Decoded d;
  d.width = png_get_image_width(ctx.png, ctx.info);
  d.height = png_get_image_height(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);

  if (depth == 16) throw std::runtime_error("unsupported 16-bit image: " + path);

  if (color == PNG_COLOR_TYPE_PALETTE) {
    d.paletted = true;
    if (keep_palette) {
      png_colorp pal = nullptr;
      int n = 0;
      png_get_PLTE(ctx.png, ctx.info, &pal, &n);
      for (int i = 0; i < n; ++i)
        d.palette.push_back({pal[i].red, pal[i].green, pal[i].blue});
      if (depth < 8) png_set_packing(ctx.png);  // expand to one index per byte
      d.channels = 1;
    } else {
      png_set_palette_to_rgb(ctx.png);
      d.channels = 3;
    }
  } else if (color == PNG_COLOR_TYPE_GRAY) {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    d.channels = 1;
  } else if (color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_strip_alpha(ctx.png);
    d.channels = 1;
  } else if (color == PNG_COLOR_TYPE_RGB) {
    d.channels = 3;
  } else if (color == PNG_COLOR_TYPE_RGB_ALPHA) {
    png_set_strip_alpha(ctx.png);
    d.channels = 3;
  } else {
    throw std::runtime_error("unsupported PNG color type in " + path);
  }

  png_read_update_info(ctx.png, ctx.info);
  const size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);
  d.bytes.resize(static_cast<size_t>(d.height) * rowbytes);
  std::vector<png_bytep> rows(static_cast<size_t>(d.height));
  for (int64_t y = 0; y < d.height; ++y) rows[y] = d.bytes.data() + y * rowbytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);
  return d;
}

void write_png_bytes(const std::string& path, int64_t width, int64_t height, int color_type,
                     const std::vector<uint8_t>& bytes, const png_color* palette,
                     int palette_size) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write image: " + path);

  PngWrite ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw std::runtime_error("png: allocation failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("png: allocation failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw std::runtime_error("png: failed to encode " + path);

  png_init_io(ctx.png, f.get());
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE)
    png_set_PLTE(ctx.png, ctx.info, const_cast<png_color*>(palette), palette_size);
  png_write_info(ctx.png, ctx.info);

  const int64_t stride = width * (color_type == PNG_COLOR_TYPE_RGB ? 3 : 1);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int64_t y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + y * stride);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

}  // namespace

void write_gray_png(const std::string& path, const GrayImage& img) {
  std::vector<uint8_t> bytes(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, img.pixels[i]));
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_png_bytes(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, bytes, nullptr, 0);
}

GrayImage read_gray_png(const std::string& path) {
  Decoded d = read_png(path, /*keep_palette=*/false);
  GrayImage img(d.width, d.height);
  if (d.channels == 1) {
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = d.bytes[i] / 255.0;
  } else {
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      const double r = d.bytes[3 * i], g = d.bytes[3 * i + 1], b = d.bytes[3 * i + 2];
      img.pixels[i] = (r + g + b) / (3.0 * 255.0);
    }
  }
  return img;
}

void encode_voc_mask(const SegmentationMask& mask, const std::string& path) {
  for (uint8_t v : mask.labels)
    if (v > 1)
      throw std::invalid_argument("encode_voc_mask: labels must be 0 or 1, found " +
                                  std::to_string(int(v)));
  png_color palette[2] = {{0, 0, 0}, {255, 0, 0}};
  write_png_bytes(path, mask.width, mask.height, PNG_COLOR_TYPE_PALETTE, mask.labels, palette, 2);
}


std::vector<std::array<uint8_t, 3>> read_palette(const std::string& path) {
  Decoded d = read_png(path, /*keep_palette=*/true);
  if (!d.paletted) throw std::runtime_error("not a paletted image: " + path);
  return d.palette;
}

SegmentationMask decode_voc_mask(const std::string& path) {
  Decoded d = read_png(path, /*keep_palette=*/true);
  if (!d.paletted) throw std::runtime_error("mask is not a paletted image: " + path);
  SegmentationMask mask(d.width, d.height);
  for (size_t i = 0; i < mask.labels.size(); ++i) {
    const uint8_t idx = d.bytes[i];
    if (idx > 1)
      throw std::runtime_error("mask " + path + " contains palette index " +
                               std::to_string(int(idx)) + "; only 0 and 1 are valid");
    mask.labels[i] = idx;
  }
  return mask;
}

Tensor gray_to_3ch(const GrayImage& img) {
  Tensor t({1, 3, img.height, img.width});
  const int64_t plane = img.height * img.width;
  for (int64_t p = 0; p < plane; ++p) {
    t.data[p] = img.pixels[p];
    t.data[plane + p] = img.pixels[p];
    t.data[2 * plane + p] = img.pixels[p];
  }
  return t;
}

Tensor load_image_3ch(const std::string& path, bool require_256) {
  Decoded d = read_png(path, /*keep_palette=*/false);
  if (require_256 && (d.width != 256 || d.height != 256))
    throw std::runtime_error("image " + path + " must be 256x256, got " +
                             std::to_string(d.width) + "x" + std::to_string(d.height));
  Tensor t({1, 3, d.height, d.width});
  const int64_t plane = d.height * d.width;
  if (d.channels == 1) {
    for (int64_t p = 0; p < plane; ++p) {
      const double v = d.bytes[p] / 255.0;
      t.data[p] = v;
      t.data[plane + p] = v;
      t.data[2 * plane + p] = v;
    }
  } else {
    for (int64_t p = 0; p < plane; ++p) {
      t.data[p] = d.bytes[3 * p] / 255.0;
      t.data[plane + p] = d.bytes[3 * p + 1] / 255.0;
      t.data[2 * plane + p] = d.bytes[3 * p + 2] / 255.0;
    }
  }
  return t;
}

}  // namespace fcnseg
