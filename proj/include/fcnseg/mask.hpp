#pragma once

#include <cstdint>
#include <vector>

namespace fcnseg {

/// Binary label grid: 0 background, 1 region of interest.
struct SegmentationMask {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> labels;  // row-major, height rows of width

  SegmentationMask() = default;
  SegmentationMask(int64_t w, int64_t h) : width(w), height(h), labels(static_cast<size_t>(w * h), 0) {}

  uint8_t at(int64_t y, int64_t x) const { return labels[y * width + x]; }
  void set(int64_t y, int64_t x, uint8_t v) { labels[y * width + x] = v; }
  int64_t pixels() const { return width * height; }

  int64_t foreground_count() const {
    int64_t n = 0;
    for (uint8_t v : labels) n += (v != 0);
    return n;
  }
  bool operator==(const SegmentationMask& o) const {
    return width == o.width && height == o.height && labels == o.labels;
  }
};

/// Batch of per-pixel integer labels for loss evaluation, [N,H,W].
struct LabelBatch {
  int64_t n = 0, h = 0, w = 0;
  std::vector<uint8_t> labels;

  static LabelBatch from_masks(const std::vector<SegmentationMask>& masks);
  uint8_t at(int64_t i, int64_t y, int64_t x) const { return labels[(i * h + y) * w + x]; }
};

}  // namespace fcnseg
