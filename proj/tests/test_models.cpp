#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "fcnseg/kernels.hpp"
#include "fcnseg/model.hpp"
#include "oracle.hpp"

using namespace fcnseg;

TEST_SUITE_BEGIN("models");

namespace {

LabelBatch random_labels(int64_t h, int64_t w, uint64_t seed) {
  std::vector<SegmentationMask> masks = {oracle::random_mask(w, h, seed)};
  return LabelBatch::from_masks(masks);
}

Tensor zero_shift(const Tensor& x, int64_t shift) {
  Tensor out(x.shape);
  for (int64_t c = 0; c < x.dim(1); ++c)
    for (int64_t h = shift; h < x.dim(2); ++h)
      for (int64_t w = shift; w < x.dim(3); ++w)
        out.at4(0, c, h, w) = x.at4(0, c, h - shift, w - shift);
  return out;
}

}  // namespace

TEST_CASE("shape contract: output spatial dims equal input dims") {
  const BackboneSpec tiny = BackboneSpec::tiny();
  for (Variant v : {Variant::fcn32s, Variant::fcn16s, Variant::fcn8s, Variant::fcn_alexnet}) {
    const ModelGraph g = build_model(v, tiny, 2, 1);
    for (int64_t h : {32, 64, 96})
      for (int64_t w : {32, 96}) {
        const Tensor y = model_forward_values(g, Tensor({1, 3, h, w}));
        CHECK(y.shape == std::vector<int64_t>{1, 2, h, w});
      }
  }
}

TEST_CASE("all-zero input produces finite logits") {
  const ModelGraph g = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 3);
  const Tensor y = model_forward_values(g, Tensor({1, 3, 64, 64}));
  CHECK(y.all_finite());
}

TEST_CASE("inputs below the five-pool minimum are rejected with the bound") {
  const ModelGraph g = build_model(Variant::fcn32s, BackboneSpec::tiny(), 2, 1);
  CHECK_THROWS_WITH_AS((void)model_forward_values(g, Tensor({1, 3, 31, 64})),
                       doctest::Contains("32"), std::invalid_argument);
  CHECK_THROWS_AS(build_model(Variant::fcn8s, BackboneSpec::tiny(), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(parse_variant("resnet"), std::invalid_argument);
}

TEST_CASE("same seed gives identical shared backbone parameters across variants") {
  const BackboneSpec spec = BackboneSpec::tiny();
  const ModelGraph a = build_model(Variant::fcn8s, spec, 2, 42);
  const ModelGraph b = build_model(Variant::fcn32s, spec, 2, 42);
  for (size_t s = 0; s < a.stage_convs.size(); ++s) {
    CHECK(a.stage_convs[s].w->value.data == b.stage_convs[s].w->value.data);
    CHECK(a.stage_convs[s].b->value.data == b.stage_convs[s].b->value.data);
  }
  CHECK(a.conv6.w->value.data == b.conv6.w->value.data);
  CHECK(a.conv7.w->value.data == b.conv7.w->value.data);
  CHECK(a.score7.w->value.data == b.score7.w->value.data);

  const ModelGraph c = build_model(Variant::fcn8s, spec, 2, 43);
  CHECK(a.stage_convs[0].w->value.data != c.stage_convs[0].w->value.data);
}

TEST_CASE("fusion junction structure per variant") {
  const BackboneSpec spec = BackboneSpec::tiny();
  const std::map<Variant, int> expected = {{Variant::fcn8s, 2},
                                           {Variant::fcn16s, 1},
                                           {Variant::fcn32s, 0},
                                           {Variant::fcn_alexnet, 0}};
  for (const auto& [v, n] : expected) {
    const ModelGraph g = build_model(v, spec, 2, 7);
    CHECK(fusion_junction_count(g) == n);
    // count the actual elementwise-add junctions recorded during a forward
    Tape tape;
    (void)model_forward(tape, g, make_leaf(Tensor({1, 3, 32, 32}), false, "x"));
    int adds = 0;
    for (const auto& op : tape.ops()) adds += op->name == "add";
    CHECK(adds == n);
  }
}

TEST_CASE("trainable parameter count grows with skip refinement") {
  const BackboneSpec spec;  // default widths
  const int64_t p32 = build_model(Variant::fcn32s, spec, 2, 1).parameter_count();
  const int64_t p16 = build_model(Variant::fcn16s, spec, 2, 1).parameter_count();
  const int64_t p8 = build_model(Variant::fcn8s, spec, 2, 1).parameter_count();
  CHECK(p8 > p16);
  CHECK(p16 > p32);
}

TEST_CASE("score taps start at zero, upsampling kernels are bilinear and fixed") {
  const ModelGraph g = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 9);
  for (double v : g.score_pool4.w->value.data) CHECK(v == 0.0);
  for (double v : g.score_pool3.w->value.data) CHECK(v == 0.0);
  CHECK(!g.up_final.w->requires_grad);
  CHECK(g.up_final.w->value.data == kernels::bilinear_kernel(2, 16).data);
  // fixed kernels are not in the trainable set but are checkpointed
  for (const auto& [name, p] : g.parameters()) CHECK(p->requires_grad);
  CHECK(g.all_tensors().size() == g.parameters().size() + 3);
}

TEST_CASE("predict_mask argmax and tie rules") {
  ModelGraph g = build_model(Variant::fcn32s, BackboneSpec::tiny(), 2, 5);
  const Tensor image = random_uniform({1, 3, 64, 64}, 0, 1, 31);

  // equal logits everywhere: zeroed score head makes both channels exactly 0
  std::fill(g.score7.w->value.data.begin(), g.score7.w->value.data.end(), 0.0);
  std::fill(g.score7.b->value.data.begin(), g.score7.b->value.data.end(), 0.0);
  CHECK(predict_mask(g, image).foreground_count() == 0);

  // channel 1 strictly above channel 0 everywhere
  g.score7.b->value.data[1] = 1.0;
  CHECK(predict_mask(g, image).foreground_count() == 64 * 64);

  // random logits match a per-pixel argmax scan
  const ModelGraph r = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 77);
  const Tensor logits = model_forward_values(r, image);
  const SegmentationMask mask = predict_mask(r, image);
  for (int64_t y = 0; y < 64; ++y)
    for (int64_t x = 0; x < 64; ++x)
      CHECK(mask.at(y, x) == (logits.at4(0, 1, y, x) > logits.at4(0, 0, y, x) ? 1 : 0));
}

TEST_CASE("stride-aligned translation shifts interior logits") {
  // 32 pixels is one cell of the deepest pooling lattice, so covariance is
  // exact away from the borders; sub-lattice shifts realign pooling windows
  // and are only approximately covariant.
  const ModelGraph g = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 13);
  const Tensor x = random_uniform({1, 3, 320, 320}, 0, 1, 41);
  const Tensor xs = zero_shift(x, 32);
  const Tensor y = model_forward_values(g, x);
  const Tensor ys = model_forward_values(g, xs);
  // margin 96 keeps every receptive field (radius ~90) away from the border
  double max_diff = 0.0;
  for (int64_t k = 0; k < 2; ++k)
    for (int64_t r = 96; r < 192; ++r)
      for (int64_t c = 96; c < 192; ++c)
        max_diff = std::max(max_diff,
                            std::abs(ys.at4(0, k, r + 32, c + 32) - y.at4(0, k, r, c)));
  CHECK(max_diff <= 1e-12);
}

TEST_CASE("full tiny graph passes finite-difference gradients") {
  ModelGraph g = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 21);
  const Tensor image = random_uniform({1, 3, 32, 32}, 0, 1, 51);
  const LabelBatch labels = random_labels(32, 32, 61);
  auto input = make_leaf(image, false, "x");

  Tape tape;
  auto loss_node = softmax_cross_entropy(tape, model_forward(tape, g, input), labels);
  std::vector<ValuePtr> params;
  for (auto& [name, p] : g.parameters()) params.push_back(p);
  const auto loss_fn = [&] {
    Tape t;
    return softmax_cross_entropy(t, model_forward(t, g, input), labels)->value.data[0];
  };
  const auto r = oracle::grad_check(tape, loss_node, params, loss_fn, 1e-5, 4, 71);
  CHECK(r.max_rel_err <= 1e-4);
  CHECK(r.coords_checked >= 20);
}

TEST_CASE("surgery turns dense layers into equivalent convolutions") {
  const BackboneSpec spec = BackboneSpec::tiny();
  const ModelGraph cls = build_classifier(spec, 4, 64, 64, 33);
  REQUIRE(cls.fc.size() == 3);

  const ModelGraph conv = surgery_replace_fc(cls, 4);
  REQUIRE(conv.conv_fc.size() == 3);
  // weights are bit-equal reshapes
  CHECK(conv.conv_fc[0].w->value.data == cls.fc[0].w->value.data);
  CHECK(conv.conv_fc[0].w->value.dim(2) == 2);  // 64 input pooled five times
  CHECK(conv.conv_fc[1].w->value.dim(2) == 1);
  CHECK(conv.conv_fc[2].w->value.data == cls.fc[2].w->value.data);

  // native-resolution logits agree
  const Tensor image = random_uniform({1, 3, 64, 64}, 0, 1, 91);
  const Tensor dense_logits = model_forward_values(cls, image);
  const Tensor conv_logits = model_forward_values(conv, image);
  REQUIRE(conv_logits.shape == std::vector<int64_t>{1, 4, 1, 1});
  for (int64_t k = 0; k < 4; ++k)
    CHECK(std::abs(dense_logits.at2(0, k) - conv_logits.data[k]) <= 1e-10);

  // the convolutionized graph accepts larger inputs the dense one rejects
  const Tensor big = random_uniform({1, 3, 96, 96}, 0, 1, 92);
  CHECK_THROWS_AS((void)model_forward_values(cls, big), std::invalid_argument);
  const Tensor big_logits = model_forward_values(conv, big);
  CHECK(big_logits.dim(1) == 4);
  CHECK(big_logits.dim(2) > 1);

  // re-seeded score layer only when the class count changes
  const ModelGraph conv2 = surgery_replace_fc(cls, 2);
  CHECK(conv2.conv_fc[2].w->value.dim(0) == 2);
  CHECK(conv2.conv_fc[2].w->value.data != cls.fc[2].w->value.data);

  const ModelGraph fcn = build_model(Variant::fcn32s, spec, 2, 1);
  CHECK_THROWS_AS(surgery_replace_fc(fcn, 2), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip through the zip archive") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "fcnseg_ckpt_test.zip").string();
  ModelGraph g = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 55);
  // perturb a parameter so the file differs from a fresh build
  g.score7.w->value.data[0] = 1.25;
  save_checkpoint(g, path);
  const ModelGraph back = load_checkpoint(path);
  CHECK(back.variant == Variant::fcn8s);
  CHECK(back.score7.w->value.data[0] == 1.25);

  const Tensor image = random_uniform({1, 3, 64, 64}, 0, 1, 71);
  CHECK(model_forward_values(back, image).data == model_forward_values(g, image).data);
  fs::remove(path);
}

TEST_SUITE_END();
