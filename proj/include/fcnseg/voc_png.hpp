#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/mask.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

/// 8-bit grayscale raster in [0,1] doubles.
struct GrayImage {
  int64_t width = 0, height = 0;
  std::vector<double> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int64_t w, int64_t h) : width(w), height(h), pixels(static_cast<size_t>(w * h), 0.0) {}
  double at(int64_t y, int64_t x) const { return pixels[y * width + x]; }
  void set(int64_t y, int64_t x, double v) { pixels[y * width + x] = v; }
};

void write_gray_png(const std::string& path, const GrayImage& img);
GrayImage read_gray_png(const std::string& path);

/// VOC-style paletted mask: index 0 -> (0,0,0) background, index 1 ->
/// (255,0,0) region of interest. The decoder also accepts the (128,0,0)
/// palette variant and any file whose pixel indices stay below 2.
void encode_voc_mask(const SegmentationMask& mask, const std::string& path);
SegmentationMask decode_voc_mask(const std::string& path);

/// Palette entries of a paletted PNG as (r,g,b) triples.
std::vector<std::array<uint8_t, 3>> read_palette(const std::string& path);

/// Loads an 8-bit grayscale (replicated) or RGB image as [1,3,H,W] in [0,1].
/// When require_256 is set the image must be exactly 256x256.
Tensor load_image_3ch(const std::string& path, bool require_256 = false);

Tensor gray_to_3ch(const GrayImage& img);

}  // namespace fcnseg
