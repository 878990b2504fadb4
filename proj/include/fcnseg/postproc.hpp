#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fcnseg/mask.hpp"

namespace fcnseg {

struct StructuringElement {
  enum class Shape { square, disk };
  Shape shape = Shape::disk;
  int radius = 1;

  static StructuringElement disk(int radius);
  static StructuringElement square(int radius);
  /// Offsets (dy,dx) covered by the element; symmetric about the origin.
  std::vector<std::pair<int, int>> offsets() const;
};

enum class MorphOp { erode, dilate, open, close };

/// Binary median = majority vote over an odd window; borders replicate edges.
SegmentationMask median_filter(const SegmentationMask& mask, int window);

/// Pixels outside the image count as background for both erode and dilate.
SegmentationMask morph(const SegmentationMask& mask, MorphOp op, const StructuringElement& se);

/// 8-connected labeling; keeps the largest foreground component, ties going
/// to the component whose first pixel comes earliest in row-major order.
SegmentationMask keep_largest_component(const SegmentationMask& mask);

/// Background regions not 4-connected to the border become foreground.
SegmentationMask fill_holes(const SegmentationMask& mask);

int64_t count_components(const SegmentationMask& mask);  // 8-connectivity

struct PostprocStep {
  enum class Kind { median, erode, dilate, open, close, keep_largest, fill_holes };
  Kind kind;
  int window = 3;          // median
  StructuringElement se;   // morphology
};
using PostprocConfig = std::vector<PostprocStep>;

/// Parses "median:3,open:disk:1,keep-largest,fill-holes".
PostprocConfig parse_pipeline(const std::string& description);
PostprocConfig default_pipeline();
std::string pipeline_string(const PostprocConfig& config);

SegmentationMask postprocess(const SegmentationMask& mask, const PostprocConfig& config);

}  // namespace fcnseg
