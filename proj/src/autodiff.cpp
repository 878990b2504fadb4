#include "fcnseg/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

#include "fcnseg/kernels.hpp"

namespace fcnseg {

ValuePtr make_leaf(Tensor value, bool requires_grad, std::string name) {
  auto v = std::make_shared<Value>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  v->name = std::move(name);
  return v;
}

ValuePtr Tape::record(Tensor out, std::vector<ValuePtr> ins, std::function<void(Value&)> rule,
                      std::string name) {
  auto v = std::make_shared<Value>();
  v->value = std::move(out);
  v->inputs = std::move(ins);
  for (const auto& in : v->inputs)
    if (in->requires_grad) v->requires_grad = true;
  v->backward_rule = std::move(rule);
  v->name = std::move(name);
  ops_.push_back(v);
  return v;
}

void Tape::backward(const ValuePtr& loss) {
  if (loss->value.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                shape_str(loss->value.shape));
  bool on_tape = false;
  for (const auto& op : ops_)
    if (op == loss) on_tape = true;
  if (!on_tape) throw std::invalid_argument("backward: loss was not produced through this tape");

  std::unordered_set<Value*> seen;
  for (const auto& op : ops_) {
    if (seen.insert(op.get()).second) op->zero_grad();
    for (const auto& in : op->inputs)
      if (seen.insert(in.get()).second) in->zero_grad();
  }

  loss->grad.data[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    Value& v = **it;
    if (v.requires_grad && v.backward_rule) v.backward_rule(v);
  }
}

ValuePtr conv2d(Tape& tape, ValuePtr x, ValuePtr w, ValuePtr b, int stride, int pad) {
  Tensor y = kernels::conv2d_forward(x->value, w->value, b->value, stride, pad);
  auto rule = [x, w, b, stride, pad](Value& self) {
    if (x->requires_grad)
      add_inplace(x->grad, kernels::conv2d_grad_input(self.grad, w->value, stride, pad,
                                                      x->value.dim(2), x->value.dim(3)));
    if (w->requires_grad)
      add_inplace(w->grad, kernels::conv2d_grad_weight(self.grad, x->value, stride, pad,
                                                       w->value.dim(2), w->value.dim(3)));
    if (b->requires_grad) add_inplace(b->grad, kernels::conv2d_grad_bias(self.grad));
  };
  return tape.record(std::move(y), {x, w, b}, rule, "conv2d");
}

ValuePtr max_pool2d(Tape& tape, ValuePtr x, int k, int stride) {
  auto r = kernels::max_pool2d_forward(x->value, k, stride);
  auto argmax = std::make_shared<std::vector<int64_t>>(std::move(r.argmax));
  auto rule = [x, argmax](Value& self) {
    if (x->requires_grad)
      add_inplace(x->grad, kernels::max_pool2d_grad_input(self.grad, *argmax, x->value.shape));
  };
  return tape.record(std::move(r.y), {x}, rule, "max_pool2d");
}

ValuePtr transposed_conv2d(Tape& tape, ValuePtr x, ValuePtr w, int stride) {
  Tensor y = kernels::tconv2d_forward(x->value, w->value, stride);
  auto rule = [x, w, stride](Value& self) {
    if (x->requires_grad)
      add_inplace(x->grad, kernels::tconv2d_grad_input(self.grad, w->value, stride));
    if (w->requires_grad)
      add_inplace(w->grad, kernels::tconv2d_grad_weight(self.grad, x->value, stride,
                                                        w->value.dim(2), w->value.dim(3)));
  };
  return tape.record(std::move(y), {x, w}, rule, "transposed_conv2d");
}

ValuePtr relu(Tape& tape, ValuePtr x) {
  Tensor y = kernels::relu_forward(x->value);
  auto rule = [x](Value& self) {
    if (x->requires_grad) add_inplace(x->grad, kernels::relu_grad_input(self.grad, x->value));
  };
  return tape.record(std::move(y), {x}, rule, "relu");
}

ValuePtr add(Tape& tape, ValuePtr a, ValuePtr b) {
  Tensor y = kernels::add_forward(a->value, b->value);
  auto rule = [a, b](Value& self) {
    if (a->requires_grad) add_inplace(a->grad, self.grad);
    if (b->requires_grad) add_inplace(b->grad, self.grad);
  };
  return tape.record(std::move(y), {a, b}, rule, "add");
}

ValuePtr center_crop(Tape& tape, ValuePtr x, int64_t out_h, int64_t out_w) {
  Tensor y = kernels::crop_forward(x->value, out_h, out_w);
  auto rule = [x](Value& self) {
    if (x->requires_grad) add_inplace(x->grad, kernels::crop_grad_input(self.grad, x->value.shape));
  };
  return tape.record(std::move(y), {x}, rule, "center_crop");
}

ValuePtr dense(Tape& tape, ValuePtr x, ValuePtr w, ValuePtr b) {
  Tensor y = kernels::dense_forward(x->value, w->value, b->value);
  auto rule = [x, w, b](Value& self) {
    if (x->requires_grad)
      add_inplace(x->grad, kernels::dense_grad_input(self.grad, w->value, x->value.shape));
    if (w->requires_grad) add_inplace(w->grad, kernels::dense_grad_weight(self.grad, x->value));
    if (b->requires_grad) add_inplace(b->grad, kernels::dense_grad_bias(self.grad));
  };
  return tape.record(std::move(y), {x, w, b}, rule, "dense");
}

ValuePtr sum(Tape& tape, ValuePtr x) {
  double total = 0.0;
  for (double v : x->value.data) total += v;
  Tensor y({1});
  y.data[0] = total;
  auto rule = [x](Value& self) {
    if (!x->requires_grad) return;
    const double g = self.grad.data[0];
    for (auto& v : x->grad.data) v += g;
  };
  return tape.record(std::move(y), {x}, rule, "sum");
}

ValuePtr softmax_cross_entropy(Tape& tape, ValuePtr logits, const LabelBatch& labels) {
  auto r = kernels::softmax_cross_entropy_forward(logits->value, labels);
  auto softmax = std::make_shared<Tensor>(std::move(r.softmax));
  auto labels_copy = std::make_shared<LabelBatch>(labels);
  Tensor y({1});
  y.data[0] = r.loss;
  auto rule = [logits, softmax, labels_copy](Value& self) {
    if (logits->requires_grad)
      add_inplace(logits->grad, kernels::softmax_cross_entropy_grad_logits(
                                    *softmax, *labels_copy, self.grad.data[0]));
  };
  return tape.record(std::move(y), {logits}, rule, "softmax_cross_entropy");
}

}  // namespace fcnseg
