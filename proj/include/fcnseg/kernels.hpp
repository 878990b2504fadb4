#pragma once

#include <vector>

#include "fcnseg/mask.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg::kernels {

// All kernels allocate fresh outputs and never mutate inputs. Every loop is
// written in gather form (one writer per output element, fixed inner
// accumulation order), so results are bit-identical for any OpenMP thread
// count.

/// Cross-correlation (no kernel flip). x [N,Cin,H,W], w [Cout,Cin,kh,kw],
/// b [Cout]. Output spatial extent floor((H+2p-kh)/s)+1.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad,
                         int64_t in_h, int64_t in_w);
Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad,
                          int64_t kh, int64_t kw);
Tensor conv2d_grad_bias(const Tensor& gy);

struct PoolResult {
  Tensor y;
  std::vector<int64_t> argmax;  // flat input index per output element
};
/// Max over k-by-k windows; ties go to the first element in row-major order.
PoolResult max_pool2d_forward(const Tensor& x, int k, int stride);
Tensor max_pool2d_grad_input(const Tensor& gy, const std::vector<int64_t>& argmax,
                             const std::vector<int64_t>& in_shape);

/// Transposed convolution. x [N,C,H,W], w [C,Cout,kh,kw], output
/// spatial extent (H-1)*stride + kh. Adjoint of conv2d with the same kernel.
Tensor tconv2d_forward(const Tensor& x, const Tensor& w, int stride);
Tensor tconv2d_grad_input(const Tensor& gy, const Tensor& w, int stride);
Tensor tconv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int64_t kh, int64_t kw);

Tensor relu_forward(const Tensor& x);
Tensor relu_grad_input(const Tensor& gy, const Tensor& x);  // gradient at 0 is 0

Tensor add_forward(const Tensor& a, const Tensor& b);

/// Center crop of the two trailing spatial dims.
Tensor crop_forward(const Tensor& x, int64_t out_h, int64_t out_w);
Tensor crop_grad_input(const Tensor& gy, const std::vector<int64_t>& in_shape);

/// Dense layer over flattened input. x [N,C,H,W] or [N,D], w [out,D], b [out].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor dense_grad_input(const Tensor& gy, const Tensor& w, const std::vector<int64_t>& in_shape);
Tensor dense_grad_weight(const Tensor& gy, const Tensor& x);
Tensor dense_grad_bias(const Tensor& gy);

struct SoftmaxCeResult {
  double loss = 0.0;
  Tensor softmax;  // cached probabilities [N,K,H,W] for the backward pass
};
/// Mean over all N*H*W pixels of -log softmax(logits)[label], stabilized by
/// max subtraction. Rejects labels outside 0..K-1.
SoftmaxCeResult softmax_cross_entropy_forward(const Tensor& logits, const LabelBatch& labels);
Tensor softmax_cross_entropy_grad_logits(const Tensor& softmax, const LabelBatch& labels,
                                         double upstream);

/// Bilinear seed for upsampling kernels: f = ceil(k/2), c = (2f-1-(k mod 2))/(2f),
/// w1d[i] = 1 - |i/f - c|, kernel = outer(w1d, w1d), one diagonal block per channel.
Tensor bilinear_kernel(int64_t channels, int64_t k);

}  // namespace fcnseg::kernels
