#include "fcnseg/ref_kernels.hpp"

#include <algorithm>

namespace fcnseg::ref {

namespace {

// zero-padded copy of one image plane set
Tensor pad_input(const Tensor& x, int pad) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor p({N, C, H + 2 * pad, W + 2 * pad});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) p.at4(n, c, h + pad, w + pad) = x.at4(n, c, h, w);
  return p;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const Tensor xp = pad_input(x, pad);
  const int64_t N = x.dim(0), Cin = x.dim(1);
  const int64_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t OH = (x.dim(2) + 2 * pad - kh) / stride + 1;
  const int64_t OW = (x.dim(3) + 2 * pad - kw) / stride + 1;
  Tensor y({N, Cout, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = b.numel() ? b.data[co] : 0.0;
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j)
                acc += xp.at4(n, ci, oh * stride + i, ow * stride + j) * w.at4(co, ci, i, j);
          y.at4(n, co, oh, ow) = acc;
        }
  return y;
}

Tensor max_pool2d(const Tensor& x, int k, int stride) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OH = (H - k) / stride + 1;
  const int64_t OW = (W - k) / stride + 1;
  Tensor y({N, C, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double best = x.at4(n, c, oh * stride, ow * stride);
          for (int64_t i = 0; i < k; ++i)
            for (int64_t j = 0; j < k; ++j)
              best = std::max(best, x.at4(n, c, oh * stride + i, ow * stride + j));
          y.at4(n, c, oh, ow) = best;
        }
  return y;
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& w, int stride) {
  // scatter form: every input pixel stamps a scaled kernel into the output
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor y({N, Cout, (H - 1) * stride + kh, (W - 1) * stride + kw});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ci = 0; ci < C; ++ci)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t ww = 0; ww < W; ++ww) {
          const double v = x.at4(n, ci, h, ww);
          for (int64_t co = 0; co < Cout; ++co)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j)
                y.at4(n, co, h * stride + i, ww * stride + j) += v * w.at4(ci, co, i, j);
        }
  return y;
}

}  // namespace fcnseg::ref
