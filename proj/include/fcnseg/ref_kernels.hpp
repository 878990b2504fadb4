#pragma once

#include "fcnseg/tensor.hpp"

namespace fcnseg::ref {

// Single-threaded naive implementations, deliberately written as plain
// nested loops over an explicitly padded copy. Kept out of the production
// library: tests compare the parallel kernels against these, and the
// kernel benchmark uses them as the serial baseline.

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor max_pool2d(const Tensor& x, int k, int stride);
Tensor transposed_conv2d(const Tensor& x, const Tensor& w, int stride);

}  // namespace fcnseg::ref
