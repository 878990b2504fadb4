#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/mask.hpp"
#include "fcnseg/voc_png.hpp"

namespace fcnseg {

/// Synthetic transverse-thigh slice: a bright subcutaneous ring around the
/// limb, surrounding muscle at mid-low intensity, a mid-gray quadriceps
/// ellipse containing a darker femur disk with a brighter marrow core.
/// The ground-truth region of interest is quadriceps + femur + marrow.
struct PhantomSlice {
  GrayImage image;
  SegmentationMask mask;
};

/// Flat intensity levels used by the renderer. Chosen so the noise-free
/// region of interest is exactly the band threshold [0.38, 0.76].
struct PhantomLevels {
  double background = 0.05;
  double ring = 0.85;
  double muscle = 0.30;
  double quadriceps = 0.55;
  double femur = 0.42;
  double marrow = 0.68;
};

/// Renders one slice. slice_frac in [0,1] moves along the scan direction and
/// smoothly modulates the anatomy; sigma is additive Gaussian noise.
PhantomSlice render_phantom_slice(uint64_t seed, int64_t size, double slice_frac,
                                  double sigma = 0.03);

struct PhantomSubject {
  std::string id;
  std::vector<PhantomSlice> slices;
};

/// A full synthetic subject of scan_count sequential slices with ground
/// truth. Identical seeds reproduce identical subjects bit for bit.
PhantomSubject generate_phantom(uint64_t seed, int64_t size, int scan_count, double sigma = 0.03);

}  // namespace fcnseg
