#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "fcnseg/phantom.hpp"
#include "fcnseg/pipeline.hpp"
#include "fcnseg/report.hpp"
#include "fcnseg/voc_png.hpp"
#include "oracle.hpp"

using namespace fcnseg;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("pipeline");

namespace {

// writes n single-slice phantoms and returns a manifest with the given split counts
DatasetManifest phantom_manifest(const fs::path& dir, int train_n, int val_n, int test_n,
                                 uint64_t seed, int64_t size = 64) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.tag = DatasetTag::md;
  const int total = train_n + val_n + test_n;
  for (int i = 0; i < total; ++i) {
    const auto slice = render_phantom_slice(derive_seed(seed, "img." + std::to_string(i)), size,
                                            0.5, 0.02);
    ManifestItem item;
    item.image = (dir / ("img_" + std::to_string(i) + ".png")).string();
    item.mask = (dir / ("mask_" + std::to_string(i) + ".png")).string();
    item.subject = "p" + std::to_string(i);
    item.scan_index = 1;
    item.split = i < train_n ? Split::train : (i < train_n + val_n ? Split::val : Split::test);
    write_gray_png(item.image, slice.image);
    encode_voc_mask(slice.mask, item.mask);
    m.items.push_back(std::move(item));
  }
  return m;
}

ExperimentConfig tiny_config(uint64_t seed) {
  ExperimentConfig c;
  c.backbone = BackboneSpec::tiny();
  c.variant = Variant::fcn8s;
  c.solver = optim::Solver::adam;
  c.lr = 1e-3;
  c.epochs = 2;
  c.batch_size = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("train validates its configuration and splits") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_cfg";
  const auto manifest = phantom_manifest(dir, 2, 1, 0, 100);
  auto config = tiny_config(1);
  config.epochs = 0;
  CHECK_THROWS_AS(train(config, manifest), std::invalid_argument);
  config.epochs = 1;
  config.lr = 0.0;
  CHECK_THROWS_AS(train(config, manifest), std::invalid_argument);

  DatasetManifest empty;
  CHECK_THROWS_AS(train(tiny_config(1), empty), std::invalid_argument);
}

TEST_CASE("training runs, records curves and returns the best-val checkpoint") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_train";
  const auto manifest = phantom_manifest(dir, 4, 2, 2, 200);
  const auto config = tiny_config(7);
  const auto result = train(config, manifest);
  CHECK(result.record.train_loss.size() == 2);
  CHECK(result.record.val_jsi.size() == 2);
  CHECK(result.record.best_epoch >= 0);
  CHECK(result.record.best_epoch < 2);
  for (double l : result.record.train_loss) CHECK(std::isfinite(l));

  double best = -1.0;
  int64_t best_epoch = -1;
  for (size_t e = 0; e < result.record.val_jsi.size(); ++e)
    if (result.record.val_jsi[e] > best) {
      best = result.record.val_jsi[e];
      best_epoch = static_cast<int64_t>(e);
    }
  CHECK(result.record.best_epoch == best_epoch);
}

TEST_CASE("identical seeds give bit-identical loss curves and metrics") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_det";
  const auto manifest = phantom_manifest(dir, 4, 2, 2, 300);
  const auto config = tiny_config(11);
  const auto a = train(config, manifest);
  const auto b = train(config, manifest);
  CHECK(a.record.train_loss == b.record.train_loss);
  CHECK(a.record.val_jsi == b.record.val_jsi);
  const auto ea = evaluate(a.model, manifest, Split::test, false);
  const auto eb = evaluate(b.model, manifest, Split::test, false);
  CHECK(ea.agg.jsi.mean == eb.agg.jsi.mean);
}

TEST_CASE("evaluate scores a model against its own predictions at one") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_self";
  auto manifest = phantom_manifest(dir, 2, 1, 3, 400);
  const ModelGraph model = build_model(Variant::fcn8s, BackboneSpec::tiny(), 2, 19);

  // overwrite the ground truths with the model's own predictions
  for (const auto* item : manifest.in_split(Split::test)) {
    const SegmentationMask pred = predict_mask(model, load_image_3ch(item->image));
    REQUIRE(pred.foreground_count() > 0);
    REQUIRE(pred.foreground_count() < pred.pixels());
    encode_voc_mask(pred, item->mask);
  }
  const auto ev = evaluate(model, manifest, Split::test, false);
  CHECK(ev.agg.jsi.mean == 1.0);
  CHECK(ev.agg.dsc.mean == 1.0);
  CHECK(ev.agg.sensitivity.mean == 1.0);
  CHECK(ev.agg.specificity.mean == 1.0);
  CHECK(ev.agg.mcc.mean == 1.0);
  CHECK(ev.flagged.empty());
}

TEST_CASE("evaluate flags missing masks and continues") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_missing";
  auto manifest = phantom_manifest(dir, 2, 1, 3, 500);
  fs::remove(manifest.items.back().mask);
  const ModelGraph model = build_model(Variant::fcn32s, BackboneSpec::tiny(), 2, 23);
  const auto ev = evaluate(model, manifest, Split::test, false);
  CHECK(ev.flagged.size() == 1);
  CHECK(ev.items.size() == 2);
}

TEST_CASE("cross-validation covers every image exactly once") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_cv";
  auto manifest = phantom_manifest(dir, 10, 0, 0, 600);
  for (auto& item : manifest.items) item.split = Split::train;  // folds reassign

  auto config = tiny_config(31);
  config.epochs = 1;
  config.folds = 5;
  const auto cv = cross_validate(config, manifest);
  CHECK(cv.fold_records.size() == 5);
  CHECK(cv.pooled.images == 10);

  int64_t total_reports = 0;
  for (const auto& rec : cv.fold_records) total_reports += rec.test_reports.size();
  CHECK(total_reports == 10);

  // pooled mean equals the image-count weighted mean of fold means
  double weighted = 0.0;
  int64_t n = 0;
  for (const auto& rec : cv.fold_records) {
    const auto agg = aggregate(rec.test_reports);
    weighted += agg.jsi.mean * static_cast<double>(agg.jsi.n);
    n += agg.jsi.n;
  }
  if (n > 0) CHECK(cv.pooled.jsi.mean == doctest::Approx(weighted / n).epsilon(1e-12));

  config.folds = 1;
  CHECK_THROWS_AS(cross_validate(config, manifest), std::invalid_argument);
}

TEST_CASE("bench reports mean, spread and a separate post-processing term") {
  const ModelGraph model = build_model(Variant::fcn32s, BackboneSpec::tiny(), 2, 29);
  std::vector<Tensor> images;
  for (uint64_t i = 0; i < 2; ++i) images.push_back(random_uniform({1, 3, 64, 64}, 0, 1, 700 + i));

  CHECK_THROWS_AS(bench_inference(model, images, 2), std::invalid_argument);

  const auto plain = bench_inference(model, images, 3, false);
  CHECK(plain.samples == 6);
  CHECK(plain.predict_mean_ms > 0.0);
  CHECK(plain.postproc_mean_ms == 0.0);

  const auto post = bench_inference(model, images, 3, true);
  CHECK(post.postproc_mean_ms > 0.0);
  CHECK(post.total_mean_ms() == post.predict_mean_ms + post.postproc_mean_ms);
  const std::string kv = post.kv();
  CHECK(kv.find("bench_predict_ms_mean=") != std::string::npos);
  CHECK(kv.find("bench_postproc_ms_mean=") != std::string::npos);
  CHECK(kv.find("bench_samples=") != std::string::npos);
}

TEST_CASE("run records serialize to key=value files") {
  const auto dir = fs::temp_directory_path() / "fcnseg_pipe_rec";
  fs::create_directories(dir);
  RunRecord rec;
  rec.config = tiny_config(3);
  rec.train_loss = {0.7, 0.5};
  rec.val_jsi = {0.1, 0.2};
  rec.best_epoch = 1;
  MetricReport r;
  r.jsi = 0.5;
  r.counts = ConfusionCounts{1, 1, 1, 1};
  rec.test_reports = {r};
  const std::string path = (dir / "record.kv").string();
  write_run_record(rec, path);

  const auto kv = report::read_kv(path);
  CHECK(kv.at("variant") == "fcn8s");
  CHECK(kv.at("best_epoch") == "1");
  CHECK(kv.at("test_jsi_mean").substr(0, 3) == "0.5");
}

TEST_SUITE_END();
