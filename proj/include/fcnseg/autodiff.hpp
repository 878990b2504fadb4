#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fcnseg/mask.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

class Value;
using ValuePtr = std::shared_ptr<Value>;

/// One node of the recorded computation: a tensor value, its gradient
/// accumulator, and (for recorded operations) the rule that pushes the
/// node's gradient into its inputs.
class Value {
 public:
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::string name;
  std::vector<ValuePtr> inputs;
  std::function<void(Value&)> backward_rule;

  bool has_grad() const { return grad.numel() == value.numel() && grad.numel() > 0; }
  void ensure_grad() {
    if (!grad.same_shape(value.shape)) grad = Tensor::zeros(value.shape);
  }
  void zero_grad() {
    ensure_grad();
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
  }
};

/// Creates a graph leaf (input or parameter) outside any tape.
ValuePtr make_leaf(Tensor value, bool requires_grad, std::string name = "");

/// Ordered record of operations; construction order is topological, so
/// replaying backward rules in reverse yields every reachable gradient.
class Tape {
 public:
  ValuePtr record(Tensor out, std::vector<ValuePtr> ins, std::function<void(Value&)> rule,
                  std::string name);

  /// Reverse sweep from a scalar loss recorded on this tape. Zeroes all
  /// gradients first, seeds d(loss)/d(loss) = 1, then replays rules in
  /// reverse order.
  void backward(const ValuePtr& loss);

  void clear() { ops_.clear(); }
  size_t size() const { return ops_.size(); }
  const std::vector<ValuePtr>& ops() const { return ops_; }

 private:
  std::vector<ValuePtr> ops_;
};

// Recorded operations. Shapes and argument contracts are validated by the
// underlying kernels.
ValuePtr conv2d(Tape& tape, ValuePtr x, ValuePtr w, ValuePtr b, int stride, int pad);
ValuePtr max_pool2d(Tape& tape, ValuePtr x, int k, int stride);
ValuePtr transposed_conv2d(Tape& tape, ValuePtr x, ValuePtr w, int stride);
ValuePtr relu(Tape& tape, ValuePtr x);
ValuePtr add(Tape& tape, ValuePtr a, ValuePtr b);
ValuePtr center_crop(Tape& tape, ValuePtr x, int64_t out_h, int64_t out_w);
ValuePtr dense(Tape& tape, ValuePtr x, ValuePtr w, ValuePtr b);
ValuePtr sum(Tape& tape, ValuePtr x);
ValuePtr softmax_cross_entropy(Tape& tape, ValuePtr logits, const LabelBatch& labels);

}  // namespace fcnseg
