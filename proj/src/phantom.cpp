#include "fcnseg/phantom.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "fcnseg/tensor.hpp"

namespace fcnseg {

namespace {

struct Ellipse {
  double cx, cy, ax, ay;  // center and semi-axes, in unit coordinates
  bool contains(double x, double y) const {
    const double dx = (x - cx) / ax, dy = (y - cy) / ay;
    return dx * dx + dy * dy <= 1.0;
  }
};

struct Anatomy {
  Ellipse thigh, ring_inner, quadriceps, femur, marrow;
};

Anatomy make_anatomy(uint64_t seed, double slice_frac) {
  std::mt19937_64 rng(derive_seed(seed, "phantom.geometry"));
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  const double jx = jitter(rng), jy = jitter(rng), ja = jitter(rng);

  // slices bulge toward mid-thigh and taper at the ends
  const double m = 0.88 + 0.12 * std::sin(3.14159265358979323846 * slice_frac);

  Anatomy a;
  a.thigh = {0.5 + jx, 0.5 + jy, (0.43 + ja) * m, (0.41 + ja) * m};
  a.ring_inner = {a.thigh.cx, a.thigh.cy, a.thigh.ax * 0.88, a.thigh.ay * 0.88};
  a.quadriceps = {0.5 + jx, 0.42 + jy, (0.26 + ja) * m, (0.22 + ja) * m};
  a.femur = {0.5 + jx, 0.47 + jy, 0.085 * m, 0.085 * m};
  a.marrow = {0.5 + jx, 0.47 + jy, 0.045 * m, 0.045 * m};
  return a;
}

}  // namespace

PhantomSlice render_phantom_slice(uint64_t seed, int64_t size, double slice_frac, double sigma) {
  if (size < 64) throw std::invalid_argument("phantom size must be at least 64");
  const PhantomLevels lv;
  const Anatomy a = make_anatomy(seed, slice_frac);

  PhantomSlice out{GrayImage(size, size), SegmentationMask(size, size)};
  for (int64_t py = 0; py < size; ++py)
    for (int64_t px = 0; px < size; ++px) {
      const double x = (px + 0.5) / static_cast<double>(size);
      const double y = (py + 0.5) / static_cast<double>(size);
      double v = lv.background;
      bool roi = false;
      if (a.thigh.contains(x, y)) {
        v = a.ring_inner.contains(x, y) ? lv.muscle : lv.ring;
        if (a.quadriceps.contains(x, y)) {
          v = lv.quadriceps;
          roi = true;
        }
        if (a.femur.contains(x, y)) {
          v = lv.femur;
          roi = true;
        }
        if (a.marrow.contains(x, y)) {
          v = lv.marrow;
          roi = true;
        }
      }
      out.image.set(py, px, v);
      out.mask.set(py, px, roi ? 1 : 0);
    }

  if (sigma > 0.0) {
    std::mt19937_64 rng(derive_seed(seed, "phantom.noise." + std::to_string(slice_frac)));
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& v : out.image.pixels) v = std::min(1.0, std::max(0.0, v + noise(rng)));
  }
  return out;
}

PhantomSubject generate_phantom(uint64_t seed, int64_t size, int scan_count, double sigma) {
  if (scan_count < 1) throw std::invalid_argument("phantom scan count must be at least 1");
  PhantomSubject subject;
  subject.id = "phantom_" + std::to_string(seed);
  subject.slices.reserve(static_cast<size_t>(scan_count));
  for (int s = 0; s < scan_count; ++s) {
    // same subject seed for every slice: geometry jitter stays fixed and only
    // the slice fraction (and noise stream) moves along the scan
    const double frac = scan_count == 1 ? 0.5 : static_cast<double>(s) / (scan_count - 1);
    subject.slices.push_back(render_phantom_slice(seed, size, frac, sigma));
  }
  return subject;
}

}  // namespace fcnseg
