#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/manifest.hpp"
#include "fcnseg/metrics.hpp"
#include "fcnseg/model.hpp"
#include "fcnseg/optim.hpp"
#include "fcnseg/postproc.hpp"

namespace fcnseg {

struct ExperimentConfig {
  DatasetTag dataset = DatasetTag::md;
  Variant variant = Variant::fcn8s;
  optim::Solver solver = optim::Solver::adam;
  double lr = 1e-4;
  int64_t epochs = 50;
  int64_t batch_size = 4;
  int64_t folds = 5;
  uint64_t seed = 0;
  bool postproc = false;
  BackboneSpec backbone;
  optim::HyperOverrides hyper;  // lr is applied on top of these

  std::string kv() const;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<double> train_loss;  // one entry per epoch
  std::vector<double> val_jsi;     // one entry per epoch
  int64_t best_epoch = -1;         // epoch whose checkpoint is returned
  std::vector<MetricReport> test_reports;       // raw predictions
  std::vector<MetricReport> test_reports_post;  // after post-processing
  std::vector<double> inference_ms;             // per test image
  int fold = -1;
};

struct TrainResult {
  ModelGraph model;
  RunRecord record;
};

/// Epochs of shuffled minibatch steps over the train split; tracks per-epoch
/// mean loss and validation JSI and returns the parameters of the epoch with
/// the best validation JSI. NaN losses abort with epoch/step diagnostics.
TrainResult train(const ExperimentConfig& config, const DatasetManifest& manifest);

struct EvalItem {
  std::string image;
  MetricReport report;
  double inference_ms = 0.0;
  double postproc_ms = 0.0;
};

struct EvalResult {
  std::vector<EvalItem> items;
  AggregateReport agg;
  std::vector<std::string> flagged;  // items skipped because of missing files
};

/// Per-image predict -> optional post-process -> confusion vs ground truth.
/// Items with unreadable masks are flagged and the run continues.
EvalResult evaluate(const ModelGraph& model, const DatasetManifest& manifest, Split split,
                    bool postproc_on, const PostprocConfig& pipeline = default_pipeline());

struct CvResult {
  std::vector<RunRecord> fold_records;
  std::vector<ModelGraph> fold_models;
  AggregateReport pooled;  // across every test image of every fold
};

/// train + evaluate on each of kfold_splits' manifests; test partitions are
/// disjoint, so the pooled aggregate sees every image exactly once.
CvResult cross_validate(const ExperimentConfig& config, const DatasetManifest& manifest);

struct BenchResult {
  double predict_mean_ms = 0.0, predict_sd_ms = 0.0;
  double postproc_mean_ms = 0.0, postproc_sd_ms = 0.0;  // separate additive term
  int64_t samples = 0;
  bool with_postproc = false;
  double total_mean_ms() const { return predict_mean_ms + postproc_mean_ms; }
  std::string kv() const;
};

/// Warms up once, then times per-image prediction over `repetitions` passes
/// (at least 3). Post-processing cost is measured as its own additive term.
BenchResult bench_inference(const ModelGraph& model, const std::vector<Tensor>& images,
                            int repetitions, bool with_postproc = false,
                            const PostprocConfig& pipeline = default_pipeline());

void write_run_record(const RunRecord& record, const std::string& path);

}  // namespace fcnseg
