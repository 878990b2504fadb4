#include "fcnseg/model.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fcnseg/kernels.hpp"
#include "fcnseg/zipfile.hpp"

namespace fcnseg {

Variant parse_variant(const std::string& name) {
  if (name == "fcn32s") return Variant::fcn32s;
  if (name == "fcn16s") return Variant::fcn16s;
  if (name == "fcn8s") return Variant::fcn8s;
  if (name == "fcn_alexnet" || name == "fcn-alexnet") return Variant::fcn_alexnet;
  throw std::invalid_argument("unknown model variant '" + name +
                              "' (expected fcn32s|fcn16s|fcn8s|fcn_alexnet)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::fcn32s: return "fcn32s";
    case Variant::fcn16s: return "fcn16s";
    case Variant::fcn8s: return "fcn8s";
    case Variant::fcn_alexnet: return "fcn_alexnet";
    case Variant::classifier: return "classifier";
    case Variant::conv_classifier: return "conv_classifier";
  }
  return "?";
}

BackboneSpec BackboneSpec::tiny() {
  BackboneSpec s;
  s.widths = {4, 4, 6, 6, 8};
  s.head_channels = 8;
  return s;
}

namespace {

constexpr int kStages = 5;
constexpr int64_t kMinInput = 32;  // one pixel left after five stride-2 pools

void check_backbone(const BackboneSpec& spec) {
  if (spec.widths.size() != kStages)
    throw std::invalid_argument("backbone needs exactly 5 pooling stages, got " +
                                std::to_string(spec.widths.size()));
  for (int64_t w : spec.widths)
    if (w < 1) throw std::invalid_argument("backbone widths must be positive");
  if (spec.head_channels < 1) throw std::invalid_argument("backbone head width must be positive");
}

/// He-style seed: N(0, sqrt(2/fan_in)), one fixed stream per layer name so
/// variants sharing a layer name share its initialization.
Tensor conv_init(int64_t cout, int64_t cin, int64_t k, uint64_t seed, const std::string& name) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
  return random_normal({cout, cin, k, k}, stddev, derive_seed(seed, name));
}

ConvLayer make_conv(const std::string& name, int64_t cout, int64_t cin, int64_t k, int pad,
                    uint64_t seed, bool zero_init) {
  ConvLayer l;
  Tensor w = zero_init ? Tensor::zeros({cout, cin, k, k}) : conv_init(cout, cin, k, seed, name + ".w");
  l.w = make_leaf(std::move(w), true, name + ".w");
  l.b = make_leaf(Tensor::zeros({cout}), true, name + ".b");
  l.stride = 1;
  l.pad = pad;
  return l;
}

TconvLayer make_upsample(const std::string& name, int64_t channels, int64_t k, int stride) {
  TconvLayer l;
  l.w = make_leaf(kernels::bilinear_kernel(channels, k), false, name + ".w");
  l.stride = stride;
  return l;
}

int64_t pooled_extent(int64_t v, int stages) {
  for (int i = 0; i < stages; ++i) v = v / 2;
  return v;
}

void append(std::vector<optim::NamedParam>& out, const ValuePtr& p) {
  if (p) out.emplace_back(p->name, p);
}

}  // namespace

std::vector<optim::NamedParam> ModelGraph::parameters() const {
  std::vector<optim::NamedParam> out;
  for (const auto& c : stage_convs) {
    append(out, c.w);
    append(out, c.b);
  }
  for (const auto* c : {&conv6, &conv7, &score7, &score_pool4, &score_pool3}) {
    append(out, c->w);
    append(out, c->b);
  }
  for (const auto& d : fc) {
    append(out, d.w);
    append(out, d.b);
  }
  for (const auto& c : conv_fc) {
    append(out, c.w);
    append(out, c.b);
  }
  return out;
}

std::vector<optim::NamedParam> ModelGraph::all_tensors() const {
  auto out = parameters();
  for (const auto* t : {&up2a, &up2b, &up_final}) append(out, t->w);
  return out;
}

int64_t ModelGraph::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : parameters()) n += p->value.numel();
  return n;
}

ModelGraph build_model(Variant v, const BackboneSpec& spec, int64_t num_classes, uint64_t seed) {
  if (v != Variant::fcn32s && v != Variant::fcn16s && v != Variant::fcn8s &&
      v != Variant::fcn_alexnet)
    throw std::invalid_argument("build_model: variant must be one of fcn32s|fcn16s|fcn8s|fcn_alexnet");
  check_backbone(spec);
  if (num_classes < 2) throw std::invalid_argument("build_model: need at least 2 classes");

  ModelGraph g;
  g.variant = v;
  g.backbone = spec;
  g.num_classes = num_classes;
  g.seed = seed;

  const bool alexnet = v == Variant::fcn_alexnet;
  int64_t cin = 3;
  for (int s = 0; s < kStages; ++s) {
    const int64_t k = (alexnet && s < 2) ? 5 : 3;
    const std::string name = "stage" + std::to_string(s + 1);
    g.stage_convs.push_back(make_conv(name, spec.widths[s], cin, k, static_cast<int>(k / 2), seed,
                                      /*zero_init=*/false));
    cin = spec.widths[s];
  }
  g.conv6 = make_conv("conv6", spec.head_channels, cin, 3, 1, seed, false);
  g.conv7 = make_conv("conv7", spec.head_channels, spec.head_channels, 1, 0, seed, false);
  g.score7 = make_conv("score7", num_classes, spec.head_channels, 1, 0, seed, false);

  if (v == Variant::fcn16s || v == Variant::fcn8s) {
    g.score_pool4 = make_conv("score_pool4", num_classes, spec.widths[3], 1, 0, seed,
                              /*zero_init=*/true);
    g.up2a = make_upsample("up2a", num_classes, 4, 2);
  }
  if (v == Variant::fcn8s) {
    g.score_pool3 = make_conv("score_pool3", num_classes, spec.widths[2], 1, 0, seed,
                              /*zero_init=*/true);
    g.up2b = make_upsample("up2b", num_classes, 4, 2);
  }
  switch (v) {
    case Variant::fcn32s:
    case Variant::fcn_alexnet:
      g.up_final = make_upsample("up_final", num_classes, 64, 32);
      break;
    case Variant::fcn16s:
      g.up_final = make_upsample("up_final", num_classes, 32, 16);
      break;
    case Variant::fcn8s:
      g.up_final = make_upsample("up_final", num_classes, 16, 8);
      break;
    default: break;
  }
  return g;
}

ModelGraph build_classifier(const BackboneSpec& spec, int64_t num_classes, int64_t input_h,
                            int64_t input_w, uint64_t seed) {
  check_backbone(spec);
  if (num_classes < 2) throw std::invalid_argument("build_classifier: need at least 2 classes");
  if (input_h < kMinInput || input_w < kMinInput)
    throw std::invalid_argument("build_classifier: input must be at least " +
                                std::to_string(kMinInput) + "x" + std::to_string(kMinInput));

  ModelGraph g;
  g.variant = Variant::classifier;
  g.backbone = spec;
  g.num_classes = num_classes;
  g.seed = seed;
  g.native_h = input_h;
  g.native_w = input_w;

  int64_t cin = 3;
  for (int s = 0; s < kStages; ++s) {
    g.stage_convs.push_back(make_conv("stage" + std::to_string(s + 1), spec.widths[s], cin, 3, 1,
                                      seed, false));
    cin = spec.widths[s];
  }
  const int64_t ph = pooled_extent(input_h, kStages);
  const int64_t pw = pooled_extent(input_w, kStages);
  const int64_t flat = cin * ph * pw;
  const int64_t hidden = spec.head_channels;

  auto make_dense = [&](const std::string& name, int64_t out, int64_t in) {
    DenseLayer d;
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    d.w = make_leaf(random_normal({out, in}, stddev, derive_seed(seed, name + ".w")), true,
                    name + ".w");
    d.b = make_leaf(Tensor::zeros({out}), true, name + ".b");
    return d;
  };
  g.fc.push_back(make_dense("fc6", hidden, flat));
  g.fc.push_back(make_dense("fc7", hidden, hidden));
  g.fc.push_back(make_dense("fc_score", num_classes, hidden));
  return g;
}

ModelGraph surgery_replace_fc(const ModelGraph& classifier, int64_t num_classes) {
  if (classifier.variant != Variant::classifier || classifier.fc.empty())
    throw std::invalid_argument("surgery_replace_fc: graph has no dense layers to replace");

  ModelGraph g;
  g.variant = Variant::conv_classifier;
  g.backbone = classifier.backbone;
  g.num_classes = num_classes;
  g.seed = classifier.seed;
  g.native_h = classifier.native_h;
  g.native_w = classifier.native_w;
  g.stage_convs = classifier.stage_convs;  // shared backbone parameters

  const int64_t ph = pooled_extent(classifier.native_h, kStages);
  const int64_t pw = pooled_extent(classifier.native_w, kStages);
  int64_t cin = classifier.backbone.widths.back();

  for (size_t i = 0; i < classifier.fc.size(); ++i) {
    const DenseLayer& d = classifier.fc[i];
    const int64_t out = d.w->value.dim(0);
    const int64_t kh = (i == 0) ? ph : 1;
    const int64_t kw = (i == 0) ? pw : 1;
    const bool last = i + 1 == classifier.fc.size();
    const std::string name = "convfc" + std::to_string(i + 6);

    ConvLayer c;
    c.stride = 1;
    c.pad = 0;
    if (last && out != num_classes) {
      // class count changes: the score layer cannot be transplanted
      c.w = make_leaf(conv_init(num_classes, cin, 1, classifier.seed, name + ".reinit.w"), true,
                      name + ".w");
      c.b = make_leaf(Tensor::zeros({num_classes}), true, name + ".b");
    } else {
      Tensor w({out, cin, kh, kw});
      w.data = d.w->value.data;  // row-major reshape, bit-equal
      c.w = make_leaf(std::move(w), true, name + ".w");
      c.b = make_leaf(d.b->value, true, name + ".b");
    }
    g.conv_fc.push_back(std::move(c));
    cin = last ? num_classes : out;
  }
  return g;
}

namespace {

struct TrunkTaps {
  ValuePtr pool3, pool4, out;
};

TrunkTaps run_trunk(Tape& tape, const ModelGraph& g, ValuePtr x) {
  TrunkTaps taps;
  for (int s = 0; s < kStages; ++s) {
    const ConvLayer& c = g.stage_convs[s];
    x = relu(tape, conv2d(tape, x, c.w, c.b, c.stride, c.pad));
    x = max_pool2d(tape, x, 2, 2);
    if (s == 2) taps.pool3 = x;
    if (s == 3) taps.pool4 = x;
  }
  taps.out = x;
  return taps;
}

ValuePtr score_conv(Tape& tape, const ConvLayer& c, ValuePtr x) {
  return conv2d(tape, x, c.w, c.b, c.stride, c.pad);
}

}  // namespace

ValuePtr model_forward(Tape& tape, const ModelGraph& g, ValuePtr batch) {
  const Tensor& in = batch->value;
  if (in.rank() != 4)
    throw std::invalid_argument("forward: input must be [N,C,H,W], got " + shape_str(in.shape));
  const int64_t H = in.dim(2), W = in.dim(3);

  if (g.variant == Variant::classifier) {
    if (H != g.native_h || W != g.native_w)
      throw std::invalid_argument("forward: dense classifier only accepts its native " +
                                  std::to_string(g.native_h) + "x" + std::to_string(g.native_w) +
                                  " input, got " + std::to_string(H) + "x" + std::to_string(W));
    ValuePtr x = run_trunk(tape, g, batch).out;
    for (size_t i = 0; i < g.fc.size(); ++i) {
      x = dense(tape, x, g.fc[i].w, g.fc[i].b);
      if (i + 1 < g.fc.size()) x = relu(tape, x);
    }
    return x;
  }

  if (H < kMinInput || W < kMinInput)
    throw std::invalid_argument("forward: input spatial size must be at least " +
                                std::to_string(kMinInput) + "x" + std::to_string(kMinInput) +
                                ", got " + std::to_string(H) + "x" + std::to_string(W));

  if (g.variant == Variant::conv_classifier) {
    ValuePtr x = run_trunk(tape, g, batch).out;
    for (size_t i = 0; i < g.conv_fc.size(); ++i) {
      x = conv2d(tape, x, g.conv_fc[i].w, g.conv_fc[i].b, 1, 0);
      if (i + 1 < g.conv_fc.size()) x = relu(tape, x);
    }
    return x;
  }

  TrunkTaps taps = run_trunk(tape, g, batch);
  ValuePtr x = relu(tape, conv2d(tape, taps.out, g.conv6.w, g.conv6.b, 1, g.conv6.pad));
  x = relu(tape, conv2d(tape, x, g.conv7.w, g.conv7.b, 1, 0));
  x = score_conv(tape, g.score7, x);

  if (g.variant == Variant::fcn16s || g.variant == Variant::fcn8s) {
    ValuePtr s4 = score_conv(tape, g.score_pool4, taps.pool4);
    x = transposed_conv2d(tape, x, g.up2a.w, g.up2a.stride);
    x = center_crop(tape, x, s4->value.dim(2), s4->value.dim(3));
    x = add(tape, x, s4);
  }
  if (g.variant == Variant::fcn8s) {
    ValuePtr s3 = score_conv(tape, g.score_pool3, taps.pool3);
    x = transposed_conv2d(tape, x, g.up2b.w, g.up2b.stride);
    x = center_crop(tape, x, s3->value.dim(2), s3->value.dim(3));
    x = add(tape, x, s3);
  }
  x = transposed_conv2d(tape, x, g.up_final.w, g.up_final.stride);
  return center_crop(tape, x, H, W);
}

Tensor model_forward_values(const ModelGraph& g, const Tensor& batch) {
  Tape tape;
  return model_forward(tape, g, make_leaf(batch, false, "input"))->value;
}

SegmentationMask predict_mask(const ModelGraph& g, const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1)
    throw std::invalid_argument("predict_mask: expected [1,C,H,W] image, got " +
                                shape_str(image.shape));
  const Tensor logits = model_forward_values(g, image);
  const int64_t K = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
  SegmentationMask mask(W, H);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      int64_t best = 0;
      double best_v = logits.at4(0, 0, y, x);
      for (int64_t k = 1; k < K; ++k)
        if (logits.at4(0, k, y, x) > best_v) {  // strict: ties keep the lower class
          best_v = logits.at4(0, k, y, x);
          best = k;
        }
      mask.set(y, x, static_cast<uint8_t>(best));
    }
  return mask;
}

int fusion_junction_count(const ModelGraph& g) {
  switch (g.variant) {
    case Variant::fcn8s: return 2;
    case Variant::fcn16s: return 1;
    default: return 0;
  }
}

std::vector<Tensor> snapshot_parameters(const ModelGraph& g) {
  std::vector<Tensor> out;
  for (const auto& [name, p] : g.parameters()) out.push_back(p->value);
  return out;
}

void restore_parameters(ModelGraph& g, const std::vector<Tensor>& snapshot) {
  auto params = g.parameters();
  if (params.size() != snapshot.size())
    throw std::invalid_argument("restore_parameters: snapshot size mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].second->value.same_shape(snapshot[i].shape))
      throw std::invalid_argument("restore_parameters: shape mismatch at " + params[i].first);
    params[i].second->value = snapshot[i];
  }
}

namespace {

std::string widths_string(const std::vector<int64_t>& widths) {
  std::ostringstream os;
  for (size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  return os.str();
}

std::vector<int64_t> parse_widths(const std::string& s) {
  std::vector<int64_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoll(tok));
  return out;
}

}  // namespace

void save_checkpoint(const ModelGraph& g, const std::string& path) {
  std::ostringstream manifest;
  manifest << "format=fcnseg-checkpoint-v1\n";
  manifest << "variant=" << variant_name(g.variant) << "\n";
  manifest << "num_classes=" << g.num_classes << "\n";
  manifest << "seed=" << g.seed << "\n";
  manifest << "widths=" << widths_string(g.backbone.widths) << "\n";
  manifest << "head_channels=" << g.backbone.head_channels << "\n";
  manifest << "native_h=" << g.native_h << "\n";
  manifest << "native_w=" << g.native_w << "\n";

  std::vector<zipfile::Entry> entries;
  entries.push_back({"manifest.txt", manifest.str()});
  for (const auto& [name, p] : g.all_tensors()) {
    std::ostringstream blob(std::ios::binary);
    write_tensor(blob, p->value);
    entries.push_back({"params/" + name + ".fcnt", blob.str()});
  }
  zipfile::write_zip(path, entries);
}

ModelGraph load_checkpoint(const std::string& path) {
  const auto entries = zipfile::read_zip(path);
  std::map<std::string, std::string> kv;
  std::map<std::string, Tensor> blobs;
  for (const auto& e : entries) {
    if (e.name == "manifest.txt") {
      std::istringstream is(e.data);
      std::string line;
      while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
      }
    } else if (e.name.rfind("params/", 0) == 0) {
      std::istringstream is(e.data, std::ios::binary);
      const std::string name = e.name.substr(7, e.name.size() - 7 - 5);  // strip dir and .fcnt
      blobs[name] = read_tensor(is);
    }
  }
  if (kv["format"] != "fcnseg-checkpoint-v1")
    throw std::runtime_error("checkpoint " + path + ": unknown format");

  BackboneSpec spec;
  spec.widths = parse_widths(kv.at("widths"));
  spec.head_channels = std::stoll(kv.at("head_channels"));
  const int64_t classes = std::stoll(kv.at("num_classes"));
  const uint64_t seed = std::stoull(kv.at("seed"));
  const std::string variant = kv.at("variant");

  ModelGraph g;
  if (variant == "classifier") {
    g = build_classifier(spec, classes, std::stoll(kv.at("native_h")), std::stoll(kv.at("native_w")),
                         seed);
  } else if (variant == "conv_classifier") {
    ModelGraph base = build_classifier(spec, classes, std::stoll(kv.at("native_h")),
                                       std::stoll(kv.at("native_w")), seed);
    g = surgery_replace_fc(base, classes);
  } else {
    g = build_model(parse_variant(variant), spec, classes, seed);
  }

  for (const auto& [name, p] : g.all_tensors()) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw std::runtime_error("checkpoint missing tensor " + name);
    if (!p->value.same_shape(it->second.shape))
      throw std::runtime_error("checkpoint tensor " + name + " has shape " +
                               shape_str(it->second.shape) + ", expected " +
                               shape_str(p->value.shape));
    p->value = it->second;
  }
  return g;
}

}  // namespace fcnseg
