#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/autodiff.hpp"
#include "fcnseg/mask.hpp"
#include "fcnseg/optim.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

enum class Variant {
  fcn32s,
  fcn16s,
  fcn8s,
  fcn_alexnet,
  classifier,       // dense-headed classifier, fixed input size
  conv_classifier,  // classifier after dense->conv surgery, any input size
};

/// Parses the four buildable variant tags.
Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

/// Width-reduced VGG-style backbone: five stride-2 pooling stages, one 3x3
/// convolution each (5x5 in the first two stages for the AlexNet-flavoured
/// variant), followed by a two-convolution head.
struct BackboneSpec {
  std::vector<int64_t> widths{8, 16, 32, 64, 64};
  int64_t head_channels = 64;

  static BackboneSpec tiny();  // widths <= 8 for finite-difference tests
};

struct ConvLayer {
  ValuePtr w, b;
  int stride = 1, pad = 0;
};
struct TconvLayer {
  ValuePtr w;
  int stride = 1;
};
struct DenseLayer {
  ValuePtr w, b;
};

/// Layered description of one network variant. Upsampling kernels are
/// bilinear-seeded and kept fixed; score taps start at zero so early
/// training is carried by the deepest path.
struct ModelGraph {
  Variant variant = Variant::fcn8s;
  BackboneSpec backbone;
  int64_t num_classes = 2;
  uint64_t seed = 0;

  std::vector<ConvLayer> stage_convs;
  ConvLayer conv6, conv7, score7;
  ConvLayer score_pool4, score_pool3;
  TconvLayer up2a, up2b, up_final;

  std::vector<DenseLayer> fc;        // classifier
  std::vector<ConvLayer> conv_fc;    // conv_classifier
  int64_t native_h = 0, native_w = 0;

  /// Trainable parameters in a fixed order.
  std::vector<optim::NamedParam> parameters() const;
  /// All tensors including the fixed upsampling kernels (checkpointing).
  std::vector<optim::NamedParam> all_tensors() const;
  int64_t parameter_count() const;
};

ModelGraph build_model(Variant v, const BackboneSpec& spec, int64_t num_classes, uint64_t seed);

/// Backbone plus three dense layers at a fixed input size; the starting
/// point for dense->convolution surgery.
ModelGraph build_classifier(const BackboneSpec& spec, int64_t num_classes, int64_t input_h,
                            int64_t input_w, uint64_t seed);

/// Replaces each dense layer with an equivalent convolution (the first keeps
/// the pooled spatial kernel, the rest are 1x1). Weights are bit-equal
/// reshapes; the final layer is freshly seeded only when num_classes differs
/// from the classifier's output count.
ModelGraph surgery_replace_fc(const ModelGraph& classifier, int64_t num_classes);

/// Records the variant's forward pass on the tape. Segmentation variants
/// need spatial extents of at least 32 and return [N,K,H,W] logits aligned
/// with the input.
ValuePtr model_forward(Tape& tape, const ModelGraph& g, ValuePtr batch);
Tensor model_forward_values(const ModelGraph& g, const Tensor& batch);

/// Per-pixel argmax of the logits; ties go to the lower class index.
SegmentationMask predict_mask(const ModelGraph& g, const Tensor& image);

/// Number of elementwise-add fusion junctions in the variant's forward pass.
int fusion_junction_count(const ModelGraph& g);

std::vector<Tensor> snapshot_parameters(const ModelGraph& g);
void restore_parameters(ModelGraph& g, const std::vector<Tensor>& snapshot);

/// Checkpoint archive: a key=value manifest plus one tensor blob per
/// parameter, zip-packed.
void save_checkpoint(const ModelGraph& g, const std::string& path);
ModelGraph load_checkpoint(const std::string& path);

}  // namespace fcnseg
