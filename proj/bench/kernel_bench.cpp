// Compares the OpenMP kernels against the serial reference implementations.
// Usage: kernel_bench [repeats]   (thread count via OMP_NUM_THREADS)

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "fcnseg/kernels.hpp"
#include "fcnseg/postproc.hpp"
#include "fcnseg/ref_kernels.hpp"
#include "fcnseg/tensor.hpp"

using namespace fcnseg;

namespace {

double time_best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const double t0 = omp_get_wtime();
    fn();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best * 1e3;
}

void row(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-36s %10.3f %10.3f %8.2fx\n", name.c_str(), serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d, repeats: %d (best-of)\n", omp_get_max_threads(), repeats);
  std::printf("%-36s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    const Tensor x = random_uniform({2, 16, 64, 64}, -1, 1, 1);
    const Tensor w = random_uniform({32, 16, 3, 3}, -1, 1, 2);
    const Tensor b = Tensor::zeros({32});
    row("conv2d 2x16x64x64 k3 -> 32",
        time_best_of(repeats, [&] { (void)ref::conv2d(x, w, b, 1, 1); }),
        time_best_of(repeats, [&] { (void)kernels::conv2d_forward(x, w, b, 1, 1); }));
  }
  {
    const Tensor x = random_uniform({2, 32, 128, 128}, -1, 1, 4);
    row("max_pool2d 2x32x128x128 k2 s2",
        time_best_of(repeats, [&] { (void)ref::max_pool2d(x, 2, 2); }),
        time_best_of(repeats, [&] { (void)kernels::max_pool2d_forward(x, 2, 2); }));
  }
  {
    const Tensor x = random_uniform({1, 2, 16, 16}, -1, 1, 5);
    const Tensor w = kernels::bilinear_kernel(2, 16);
    row("transposed_conv2d 16x16 k16 s8",
        time_best_of(repeats, [&] { (void)ref::transposed_conv2d(x, w, 8); }),
        time_best_of(repeats, [&] { (void)kernels::tconv2d_forward(x, w, 8); }));
  }
  {
    SegmentationMask m(256, 256);
    for (int64_t y = 0; y < 256; ++y)
      for (int64_t x = 0; x < 256; ++x) m.set(y, x, ((x / 9 + y / 7) % 2) != 0);
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const double serial = time_best_of(repeats, [&] { (void)median_filter(m, 3); });
    omp_set_num_threads(max_threads);
    row("median_filter 256x256 w3 (1 thread)", serial,
        time_best_of(repeats, [&] { (void)median_filter(m, 3); }));
  }
  return 0;
}
