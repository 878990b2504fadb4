#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fcnseg/mask.hpp"

namespace fcnseg {

struct ConfusionCounts {
  uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  uint64_t total() const { return tp + tn + fp + fn; }
};

/// Per-image index values. An index is absent when its denominator is zero
/// (e.g. sensitivity on an all-background ground truth); MCC instead falls
/// back to 0 when any of its four factors vanishes.
struct MetricReport {
  std::optional<double> jsi, dsc, sensitivity, specificity, mcc;
  ConfusionCounts counts;
};

/// Unweighted per-image mean and sample standard deviation of each index.
/// Undefined per-image values are excluded and counted.
struct AggregateReport {
  struct Stat {
    double mean = 0.0;
    double sd = 0.0;
    int64_t n = 0;
    int64_t excluded = 0;
  };
  Stat jsi, dsc, sensitivity, specificity, mcc;
  int64_t images = 0;
};

ConfusionCounts confusion(const SegmentationMask& pred, const SegmentationMask& gt);
MetricReport compute_metrics(const ConfusionCounts& c);
AggregateReport aggregate(const std::vector<MetricReport>& reports);

/// Tab-separated and key=value renderings of an aggregate.
std::string format_aggregate_tsv(const AggregateReport& a);
std::string format_aggregate_kv(const AggregateReport& a, const std::string& prefix = "");

}  // namespace fcnseg
