#include "fcnseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fcnseg::kernels {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_rank4(const Tensor& t, const char* what) {
  require(t.rank() == 4, std::string(what) + " must be rank 4, got " + shape_str(t.shape));
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  require_rank4(x, "conv2d input");
  require_rank4(w, "conv2d weight");
  require(stride >= 1, "conv2d: stride must be positive");
  require(pad >= 0, "conv2d: padding must be non-negative");
  const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == Cin, "conv2d: weight expects " + std::to_string(w.dim(1)) +
                               " input channels but input has " + std::to_string(Cin));
  require(b.rank() == 1 && b.dim(0) == Cout, "conv2d: bias must be [Cout]");
  require(kh <= H + 2 * pad && kw <= W + 2 * pad,
          "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
              " exceeds padded input " + std::to_string(H + 2 * pad) + "x" +
              std::to_string(W + 2 * pad));
  const int64_t OH = (H + 2 * pad - kh) / stride + 1;
  const int64_t OW = (W + 2 * pad - kw) / stride + 1;

  Tensor y({N, Cout, OH, OW});
  const double* xd = x.data.data();
  const double* wd = w.data.data();
  const double* bd = b.data.data();
  double* yd = y.data.data();

#pragma omp parallel for collapse(3) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t oh = 0; oh < OH; ++oh) {
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = bd[co];
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int64_t i = 0; i < kh; ++i) {
              const int64_t ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = xd + ((n * Cin + ci) * H + ih) * W;
              const double* wrow = wd + ((co * Cin + ci) * kh + i) * kw;
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                acc += xrow[iw] * wrow[j];
              }
            }
          yd[((n * Cout + co) * OH + oh) * OW + ow] = acc;
        }
      }
  return y;
}

Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                         int64_t in_h, int64_t in_w) {
  const int64_t N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int64_t Cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor gx({N, Cin, in_h, in_w});
  const double* gd = gy.data.data();
  const double* wd = w.data.data();
  double* od = gx.data.data();

#pragma omp parallel for collapse(3) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t ih = 0; ih < in_h; ++ih) {
        for (int64_t iw = 0; iw < in_w; ++iw) {
          double acc = 0.0;
          for (int64_t co = 0; co < Cout; ++co)
            for (int64_t i = (ih + pad) % stride; i < kh; i += stride) {
              if (ih + pad - i < 0) break;
              const int64_t oh = (ih + pad - i) / stride;
              if (oh >= OH) continue;
              for (int64_t j = (iw + pad) % stride; j < kw; j += stride) {
                if (iw + pad - j < 0) break;
                const int64_t ow = (iw + pad - j) / stride;
                if (ow >= OW) continue;
                acc += gd[((n * Cout + co) * OH + oh) * OW + ow] *
                       wd[((co * Cin + ci) * kh + i) * kw + j];
              }
            }
          od[((n * Cin + ci) * in_h + ih) * in_w + iw] = acc;
        }
      }
  return gx;
}

Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                          int64_t kh, int64_t kw) {
  const int64_t N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int64_t Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor gw({Cout, Cin, kh, kw});
  const double* gd = gy.data.data();
  const double* xd = x.data.data();
  double* od = gw.data.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t co = 0; co < Cout; ++co)
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          double acc = 0.0;
          for (int64_t n = 0; n < N; ++n)
            for (int64_t oh = 0; oh < OH; ++oh) {
              const int64_t ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int64_t ow = 0; ow < OW; ++ow) {
                const int64_t iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                acc += gd[((n * Cout + co) * OH + oh) * OW + ow] *
                       xd[((n * Cin + ci) * H + ih) * W + iw];
              }
            }
          od[((co * Cin + ci) * kh + i) * kw + j] = acc;
        }
  return gw;
}

Tensor conv2d_grad_bias(const Tensor& gy) {
  const int64_t N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  Tensor gb({Cout});
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < Cout; ++co) {
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const double* base = gy.data.data() + (n * Cout + co) * OH * OW;
      for (int64_t p = 0; p < OH * OW; ++p) acc += base[p];
    }
    gb.data[co] = acc;
  }
  return gb;
}

PoolResult max_pool2d_forward(const Tensor& x, int k, int stride) {
  require_rank4(x, "max_pool2d input");
  require(k >= 1 && stride >= 1, "max_pool2d: window and stride must be positive");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(k <= H && k <= W, "max_pool2d: window " + std::to_string(k) + " exceeds input " +
                                std::to_string(H) + "x" + std::to_string(W));
  const int64_t OH = (H - k) / stride + 1;
  const int64_t OW = (W - k) / stride + 1;

  PoolResult r{Tensor({N, C, OH, OW}), std::vector<int64_t>(static_cast<size_t>(N * C * OH * OW))};
  const double* xd = x.data.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_idx = -1;
          for (int64_t i = 0; i < k; ++i)
            for (int64_t j = 0; j < k; ++j) {
              const int64_t idx = ((n * C + c) * H + oh * stride + i) * W + ow * stride + j;
              if (xd[idx] > best) {  // strict: ties keep the first in row-major order
                best = xd[idx];
                best_idx = idx;
              }
            }
          const int64_t out = ((n * C + c) * OH + oh) * OW + ow;
          r.y.data[out] = best;
          r.argmax[out] = best_idx;
        }
  return r;
}

Tensor max_pool2d_grad_input(const Tensor& gy, const std::vector<int64_t>& argmax,
                             const std::vector<int64_t>& in_shape) {
  Tensor gx(in_shape);
  const int64_t N = gy.dim(0), C = gy.dim(1);
  const int64_t per_slice = gy.dim(2) * gy.dim(3);
  // Scatter within one (n,c) slice stays on one thread, so accumulation
  // order is fixed.
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const int64_t base = (n * C + c) * per_slice;
      for (int64_t p = 0; p < per_slice; ++p) gx.data[argmax[base + p]] += gy.data[base + p];
    }
  return gx;
}

Tensor tconv2d_forward(const Tensor& x, const Tensor& w, int stride) {
  require_rank4(x, "transposed_conv2d input");
  require_rank4(w, "transposed_conv2d weight");
  require(stride >= 1, "transposed_conv2d: stride must be positive");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(0) == C, "transposed_conv2d: weight expects " + std::to_string(w.dim(0)) +
                             " input channels but input has " + std::to_string(C));
  require(kh >= stride && kw >= stride,
          "transposed_conv2d: kernel must be at least the stride to leave no gaps");
  const int64_t OH = (H - 1) * stride + kh;
  const int64_t OW = (W - 1) * stride + kw;

  Tensor y({N, Cout, OH, OW});
  const double* xd = x.data.data();
  const double* wd = w.data.data();

#pragma omp parallel for collapse(3) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          // only taps with (oh-i), (ow-j) divisible by the stride contribute,
          // so walk i,j in stride steps
          for (int64_t ci = 0; ci < C; ++ci)
            for (int64_t i = oh % stride; i < kh; i += stride) {
              if (oh - i < 0) break;
              const int64_t ih = (oh - i) / stride;
              if (ih >= H) continue;
              for (int64_t j = ow % stride; j < kw; j += stride) {
                if (ow - j < 0) break;
                const int64_t iw = (ow - j) / stride;
                if (iw >= W) continue;
                acc += xd[((n * C + ci) * H + ih) * W + iw] *
                       wd[((ci * Cout + co) * kh + i) * kw + j];
              }
            }
          y.data[((n * Cout + co) * OH + oh) * OW + ow] = acc;
        }
  return y;
}

Tensor tconv2d_grad_input(const Tensor& gy, const Tensor& w, int stride) {
  const int64_t N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int64_t C = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t H = (OH - kh) / stride + 1;
  const int64_t W = (OW - kw) / stride + 1;
  Tensor gx({N, C, H, W});

#pragma omp parallel for collapse(3) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ci = 0; ci < C; ++ci)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t ww = 0; ww < W; ++ww) {
          double acc = 0.0;
          for (int64_t co = 0; co < Cout; ++co)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j)
                acc += gy.data[((n * Cout + co) * OH + h * stride + i) * OW + ww * stride + j] *
                       w.data[((ci * Cout + co) * kh + i) * kw + j];
          gx.data[((n * C + ci) * H + h) * W + ww] = acc;
        }
  return gx;
}

Tensor tconv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int64_t kh, int64_t kw) {
  const int64_t N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int64_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor gw({C, Cout, kh, kw});

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t ci = 0; ci < C; ++ci)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          double acc = 0.0;
          for (int64_t n = 0; n < N; ++n)
            for (int64_t h = 0; h < H; ++h)
              for (int64_t ww = 0; ww < W; ++ww)
                acc += x.data[((n * C + ci) * H + h) * W + ww] *
                       gy.data[((n * Cout + co) * OH + h * stride + i) * OW + ww * stride + j];
          gw.data[((ci * Cout + co) * kh + i) * kw + j] = acc;
        }
  return gw;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y(x.shape);
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  return y;
}

Tensor relu_grad_input(const Tensor& gy, const Tensor& x) {
  Tensor gx(x.shape);
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) gx.data[i] = x.data[i] > 0.0 ? gy.data[i] : 0.0;
  return gx;
}

Tensor add_forward(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b),
          "add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor y(a.shape);
  const int64_t n = a.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y.data[i] = a.data[i] + b.data[i];
  return y;
}

Tensor crop_forward(const Tensor& x, int64_t out_h, int64_t out_w) {
  require_rank4(x, "crop input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(out_h <= H && out_w <= W, "crop: target " + std::to_string(out_h) + "x" +
                                        std::to_string(out_w) + " exceeds input " +
                                        std::to_string(H) + "x" + std::to_string(W));
  const int64_t oy = (H - out_h) / 2;
  const int64_t ox = (W - out_w) / 2;
  Tensor y({N, C, out_h, out_w});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < out_h; ++h)
        for (int64_t w = 0; w < out_w; ++w)
          y.at4(n, c, h, w) = x.at4(n, c, h + oy, w + ox);
  return y;
}

Tensor crop_grad_input(const Tensor& gy, const std::vector<int64_t>& in_shape) {
  Tensor gx(in_shape);
  const int64_t N = gy.dim(0), C = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  const int64_t oy = (in_shape[2] - oh) / 2;
  const int64_t ox = (in_shape[3] - ow) / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < oh; ++h)
        for (int64_t w = 0; w < ow; ++w)
          gx.at4(n, c, h + oy, w + ox) = gy.at4(n, c, h, w);
  return gx;
}

namespace {

int64_t flat_dim(const Tensor& x) {
  int64_t d = 1;
  for (size_t i = 1; i < x.rank(); ++i) d *= x.dim(i);
  return d;
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() >= 2, "dense: input must have a batch dimension");
  const int64_t N = x.dim(0), D = flat_dim(x);
  const int64_t out = w.dim(0);
  require(w.rank() == 2 && w.dim(1) == D,
          "dense: weight expects input size " + std::to_string(w.dim(1)) + " but input flattens to " +
              std::to_string(D));
  require(b.rank() == 1 && b.dim(0) == out, "dense: bias must be [out]");
  Tensor y({N, out});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t o = 0; o < out; ++o) {
      double acc = b.data[o];
      const double* xrow = x.data.data() + n * D;
      const double* wrow = w.data.data() + o * D;
      for (int64_t d = 0; d < D; ++d) acc += xrow[d] * wrow[d];
      y.at2(n, o) = acc;
    }
  return y;
}

Tensor dense_grad_input(const Tensor& gy, const Tensor& w, const std::vector<int64_t>& in_shape) {
  Tensor gx(in_shape);
  const int64_t N = gy.dim(0), out = gy.dim(1), D = w.dim(1);
#pragma omp parallel for schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t d = 0; d < D; ++d) {
      double acc = 0.0;
      for (int64_t o = 0; o < out; ++o) acc += gy.at2(n, o) * w.at2(o, d);
      gx.data[n * D + d] = acc;
    }
  return gx;
}

Tensor dense_grad_weight(const Tensor& gy, const Tensor& x) {
  const int64_t N = gy.dim(0), out = gy.dim(1), D = flat_dim(x);
  Tensor gw({out, D});
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < out; ++o)
    for (int64_t d = 0; d < D; ++d) {
      double acc = 0.0;
      for (int64_t n = 0; n < N; ++n) acc += gy.at2(n, o) * x.data[n * D + d];
      gw.at2(o, d) = acc;
    }
  return gw;
}

Tensor dense_grad_bias(const Tensor& gy) {
  const int64_t N = gy.dim(0), out = gy.dim(1);
  Tensor gb({out});
  for (int64_t o = 0; o < out; ++o) {
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) acc += gy.at2(n, o);
    gb.data[o] = acc;
  }
  return gb;
}

SoftmaxCeResult softmax_cross_entropy_forward(const Tensor& logits, const LabelBatch& labels) {
  require_rank4(logits, "softmax_cross_entropy logits");
  const int64_t N = logits.dim(0), K = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
  require(labels.n == N && labels.h == H && labels.w == W,
          "softmax_cross_entropy: label grid " + std::to_string(labels.n) + "x" +
              std::to_string(labels.h) + "x" + std::to_string(labels.w) +
              " does not match logits " + shape_str(logits.shape));
  for (uint8_t l : labels.labels)
    require(l < K, "softmax_cross_entropy: label " + std::to_string(int(l)) +
                       " out of range for " + std::to_string(K) + " classes");

  SoftmaxCeResult r;
  r.softmax = Tensor({N, K, H, W});
  const int64_t P = H * W;
  std::vector<double> pixel_loss(static_cast<size_t>(N * P));

#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t p = 0; p < P; ++p) {
      const int64_t h = p / W, w = p % W;
      double m = logits.at4(n, 0, h, w);
      for (int64_t k = 1; k < K; ++k) m = std::max(m, logits.at4(n, k, h, w));
      double z = 0.0;
      for (int64_t k = 0; k < K; ++k) z += std::exp(logits.at4(n, k, h, w) - m);
      const double log_z = m + std::log(z);
      for (int64_t k = 0; k < K; ++k)
        r.softmax.at4(n, k, h, w) = std::exp(logits.at4(n, k, h, w) - log_z);
      pixel_loss[n * P + p] = log_z - logits.at4(n, labels.at(n, h, w), h, w);
    }

  // serial sum in flat order keeps the loss bit-stable across thread counts
  double total = 0.0;
  for (double v : pixel_loss) total += v;
  r.loss = total / static_cast<double>(N * P);
  return r;
}

Tensor softmax_cross_entropy_grad_logits(const Tensor& softmax, const LabelBatch& labels,
                                         double upstream) {
  const int64_t N = softmax.dim(0), K = softmax.dim(1), H = softmax.dim(2), W = softmax.dim(3);
  const double scale = upstream / static_cast<double>(N * H * W);
  Tensor g({N, K, H, W});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t n = 0; n < N; ++n)
    for (int64_t k = 0; k < K; ++k)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
          const double onehot = (labels.at(n, h, w) == k) ? 1.0 : 0.0;
          g.at4(n, k, h, w) = (softmax.at4(n, k, h, w) - onehot) * scale;
        }
  return g;
}

Tensor bilinear_kernel(int64_t channels, int64_t k) {
  const int64_t f = (k + 1) / 2;
  const double c = (2.0 * f - 1.0 - (k % 2)) / (2.0 * f);
  std::vector<double> w1d(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) w1d[i] = 1.0 - std::abs(static_cast<double>(i) / f - c);
  Tensor w({channels, channels, k, k});
  for (int64_t ch = 0; ch < channels; ++ch)
    for (int64_t i = 0; i < k; ++i)
      for (int64_t j = 0; j < k; ++j)
        w.data[((ch * channels + ch) * k + i) * k + j] = w1d[i] * w1d[j];
  return w;
}

}  // namespace fcnseg::kernels
