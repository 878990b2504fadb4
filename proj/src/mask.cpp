#include "fcnseg/mask.hpp"

#include <stdexcept>

namespace fcnseg {

LabelBatch LabelBatch::from_masks(const std::vector<SegmentationMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("LabelBatch: empty mask list");
  LabelBatch b;
  b.n = static_cast<int64_t>(masks.size());
  b.h = masks.front().height;
  b.w = masks.front().width;
  b.labels.reserve(static_cast<size_t>(b.n * b.h * b.w));
  for (const auto& m : masks) {
    if (m.height != b.h || m.width != b.w)
      throw std::invalid_argument("LabelBatch: masks must share dimensions");
    b.labels.insert(b.labels.end(), m.labels.begin(), m.labels.end());
  }
  return b;
}

}  // namespace fcnseg
