#include "fcnseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fcnseg/voc_png.hpp"

namespace fcnseg {

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Sample {
  Tensor image;  // [1,3,H,W]
  SegmentationMask mask;
};

std::vector<Sample> load_split(const DatasetManifest& manifest, Split split) {
  std::vector<Sample> out;
  for (const auto* item : manifest.in_split(split))
    out.push_back({load_image_3ch(item->image), decode_voc_mask(item->mask)});
  return out;
}

Tensor stack_images(const std::vector<Sample>& samples, const std::vector<int64_t>& idx) {
  const Tensor& first = samples[idx[0]].image;
  const int64_t C = first.dim(1), H = first.dim(2), W = first.dim(3);
  Tensor batch({static_cast<int64_t>(idx.size()), C, H, W});
  const int64_t per = C * H * W;
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor& img = samples[idx[i]].image;
    if (img.dim(1) != C || img.dim(2) != H || img.dim(3) != W)
      throw std::invalid_argument("train: images in a batch must share dimensions");
    std::copy(img.data.begin(), img.data.end(), batch.data.begin() + static_cast<int64_t>(i) * per);
  }
  return batch;
}

LabelBatch stack_masks(const std::vector<Sample>& samples, const std::vector<int64_t>& idx) {
  std::vector<SegmentationMask> masks;
  for (int64_t i : idx) masks.push_back(samples[i].mask);
  return LabelBatch::from_masks(masks);
}

double mean_val_jsi(const ModelGraph& model, const std::vector<Sample>& val) {
  double sum = 0.0;
  int64_t n = 0;
  for (const auto& s : val) {
    const auto r = compute_metrics(confusion(predict_mask(model, s.image), s.mask));
    if (r.jsi) {
      sum += *r.jsi;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

std::string ExperimentConfig::kv() const {
  std::ostringstream os;
  os << "dataset=" << dataset_tag_name(dataset) << "\n";
  os << "variant=" << variant_name(variant) << "\n";
  os << "solver=" << optim::solver_name(solver) << "\n";
  os << "lr=" << lr << "\n";
  os << "epochs=" << epochs << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "folds=" << folds << "\n";
  os << "seed=" << seed << "\n";
  os << "postproc=" << (postproc ? 1 : 0) << "\n";
  os << "widths=";
  for (size_t i = 0; i < backbone.widths.size(); ++i) os << (i ? "," : "") << backbone.widths[i];
  os << "\n";
  os << "head_channels=" << backbone.head_channels << "\n";
  return os.str();
}

TrainResult train(const ExperimentConfig& config, const DatasetManifest& manifest) {
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be at least 1");
  if (config.lr <= 0) throw std::invalid_argument("train: learning rate must be positive");

  const auto train_samples = load_split(manifest, Split::train);
  const auto val_samples = load_split(manifest, Split::val);
  if (train_samples.empty()) throw std::invalid_argument("train: empty train split");
  if (val_samples.empty()) throw std::invalid_argument("train: empty val split");

  TrainResult result;
  result.record.config = config;
  result.model = build_model(config.variant, config.backbone, 2, derive_seed(config.seed, "init"));

  optim::HyperOverrides hyper = config.hyper;
  hyper.lr = config.lr;
  auto state = optim::make_state(config.solver, hyper);
  const auto params = result.model.parameters();

  double best_jsi = -1.0;
  std::vector<Tensor> best_params = snapshot_parameters(result.model);
  int64_t best_epoch = -1;

  std::vector<int64_t> order(train_samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, "shuffle." + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int64_t batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      const std::vector<int64_t> idx(order.begin() + start, order.begin() + end);

      Tape tape;
      auto input = make_leaf(stack_images(train_samples, idx), false, "batch");
      auto logits = model_forward(tape, result.model, input);
      auto loss = softmax_cross_entropy(tape, logits, stack_masks(train_samples, idx));

      const double loss_v = loss->value.data[0];
      if (!std::isfinite(loss_v))
        throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch + 1) + ", step " +
                                 std::to_string(batches + 1));
      tape.backward(loss);
      optim::apply_update(state, params);
      loss_sum += loss_v;
      ++batches;
    }
    result.record.train_loss.push_back(loss_sum / static_cast<double>(batches));

    const double vj = mean_val_jsi(result.model, val_samples);
    result.record.val_jsi.push_back(vj);
    if (vj > best_jsi) {
      best_jsi = vj;
      best_params = snapshot_parameters(result.model);
      best_epoch = epoch;
    }
  }

  restore_parameters(result.model, best_params);
  result.record.best_epoch = best_epoch;
  return result;
}

EvalResult evaluate(const ModelGraph& model, const DatasetManifest& manifest, Split split,
                    bool postproc_on, const PostprocConfig& pipeline) {
  const auto items = manifest.in_split(split);
  if (items.empty()) throw std::invalid_argument("evaluate: split '" + split_name(split) + "' is empty");

  EvalResult result;
  std::vector<MetricReport> reports;
  for (const auto* item : items) {
    Tensor image;
    SegmentationMask gt;
    try {
      image = load_image_3ch(item->image);
      gt = decode_voc_mask(item->mask);
    } catch (const std::exception&) {
      result.flagged.push_back(item->image);
      continue;
    }
    EvalItem e;
    e.image = item->image;
    const double t0 = now_ms();
    SegmentationMask pred = predict_mask(model, image);
    const double t1 = now_ms();
    if (postproc_on) pred = postprocess(pred, pipeline);
    e.postproc_ms = postproc_on ? now_ms() - t1 : 0.0;
    e.inference_ms = t1 - t0;
    e.report = compute_metrics(confusion(pred, gt));
    reports.push_back(e.report);
    result.items.push_back(std::move(e));
  }
  if (reports.empty()) throw std::runtime_error("evaluate: no evaluable items in split");
  result.agg = aggregate(reports);
  return result;
}

CvResult cross_validate(const ExperimentConfig& config, const DatasetManifest& manifest) {
  if (config.folds < 2) throw std::invalid_argument("cross_validate: fold count must be at least 2");
  const auto folds = kfold_splits(manifest, static_cast<int>(config.folds),
                                  derive_seed(config.seed, "cv.folds"));
  CvResult result;
  std::vector<MetricReport> pooled;
  for (size_t f = 0; f < folds.size(); ++f) {
    ExperimentConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, "cv.fold." + std::to_string(f));
    TrainResult tr;
    try {
      tr = train(fold_config, folds[f]);
    } catch (const std::exception& e) {
      throw std::runtime_error("cross_validate: fold " + std::to_string(f) + ": " + e.what());
    }
    auto ev = evaluate(tr.model, folds[f], Split::test, config.postproc);
    tr.record.fold = static_cast<int>(f);
    for (const auto& item : ev.items) {
      tr.record.test_reports.push_back(item.report);
      tr.record.inference_ms.push_back(item.inference_ms);
      pooled.push_back(item.report);
    }
    result.fold_records.push_back(std::move(tr.record));
    result.fold_models.push_back(std::move(tr.model));
  }
  result.pooled = aggregate(pooled);
  return result;
}

BenchResult bench_inference(const ModelGraph& model, const std::vector<Tensor>& images,
                            int repetitions, bool with_postproc, const PostprocConfig& pipeline) {
  if (repetitions < 3) throw std::invalid_argument("bench_inference: need at least 3 repetitions");
  if (images.empty()) throw std::invalid_argument("bench_inference: no images");

  (void)predict_mask(model, images.front());  // warm-up pass

  std::vector<double> predict_ms, post_ms;
  for (int r = 0; r < repetitions; ++r)
    for (const auto& img : images) {
      const double t0 = now_ms();
      SegmentationMask m = predict_mask(model, img);
      const double t1 = now_ms();
      predict_ms.push_back(t1 - t0);
      if (with_postproc) {
        SegmentationMask p = postprocess(m, pipeline);
        post_ms.push_back(now_ms() - t1);
        (void)p;
      }
    }

  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0, sd = 0.0;
    if (v.empty()) return std::pair{0.0, 0.0};
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    }
    return std::pair{mean, sd};
  };

  BenchResult b;
  b.samples = static_cast<int64_t>(predict_ms.size());
  b.with_postproc = with_postproc;
  std::tie(b.predict_mean_ms, b.predict_sd_ms) = stats(predict_ms);
  std::tie(b.postproc_mean_ms, b.postproc_sd_ms) = stats(post_ms);
  return b;
}

std::string BenchResult::kv() const {
  std::ostringstream os;
  os.precision(6);
  os << "bench_predict_ms_mean=" << predict_mean_ms << "\n";
  os << "bench_predict_ms_sd=" << predict_sd_ms << "\n";
  os << "bench_postproc_ms_mean=" << postproc_mean_ms << "\n";
  os << "bench_postproc_ms_sd=" << postproc_sd_ms << "\n";
  os << "bench_total_ms_mean=" << total_mean_ms() << "\n";
  os << "bench_samples=" << samples << "\n";
  os << "bench_with_postproc=" << (with_postproc ? 1 : 0) << "\n";
  return os.str();
}

namespace {

std::string join_csv(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

void write_run_record(const RunRecord& record, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write run record: " + path);
  os << record.config.kv();
  os << "fold=" << record.fold << "\n";
  os << "best_epoch=" << record.best_epoch << "\n";
  os << "train_loss=" << join_csv(record.train_loss) << "\n";
  os << "val_jsi=" << join_csv(record.val_jsi) << "\n";
  if (!record.test_reports.empty())
    os << format_aggregate_kv(aggregate(record.test_reports), "test_");
  if (!record.test_reports_post.empty())
    os << format_aggregate_kv(aggregate(record.test_reports_post), "test_post_");
  if (!record.inference_ms.empty()) os << "inference_ms=" << join_csv(record.inference_ms) << "\n";
}

}  // namespace fcnseg
