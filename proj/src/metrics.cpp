#include "fcnseg/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fcnseg {

ConfusionCounts confusion(const SegmentationMask& pred, const SegmentationMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("confusion: mask dimensions differ (" + std::to_string(pred.width) +
                                "x" + std::to_string(pred.height) + " vs " +
                                std::to_string(gt.width) + "x" + std::to_string(gt.height) + ")");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const bool p = pred.labels[i] != 0;
    const bool g = gt.labels[i] != 0;
    if (p && g) ++c.tp;
    else if (!p && !g) ++c.tn;
    else if (p && !g) ++c.fp;
    else ++c.fn;
  }
  return c;
}

MetricReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("compute_metrics: empty confusion counts");
  MetricReport r;
  r.counts = c;
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);

  if (c.tp + c.fp + c.fn > 0) {
    r.jsi = tp / (tp + fp + fn);
    r.dsc = 2.0 * tp / (2.0 * tp + fp + fn);
  }
  if (c.tp + c.fn > 0) r.sensitivity = tp / (tp + fn);
  if (c.tn + c.fp > 0) r.specificity = tn / (tn + fp);

  const double denom2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  r.mcc = denom2 > 0.0 ? (tp * tn - fp * fn) / std::sqrt(denom2) : 0.0;
  return r;
}

namespace {

AggregateReport::Stat collect(const std::vector<MetricReport>& reports,
                              std::optional<double> MetricReport::*field) {
  AggregateReport::Stat s;
  double sum = 0.0;
  for (const auto& r : reports) {
    if ((r.*field).has_value()) {
      sum += *(r.*field);
      ++s.n;
    } else {
      ++s.excluded;
    }
  }
  if (s.n > 0) s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const auto& r : reports)
      if ((r.*field).has_value()) {
        const double d = *(r.*field) - s.mean;
        ss += d * d;
      }
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace

AggregateReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: empty report list");
  AggregateReport a;
  a.images = static_cast<int64_t>(reports.size());
  a.jsi = collect(reports, &MetricReport::jsi);
  a.dsc = collect(reports, &MetricReport::dsc);
  a.sensitivity = collect(reports, &MetricReport::sensitivity);
  a.specificity = collect(reports, &MetricReport::specificity);
  a.mcc = collect(reports, &MetricReport::mcc);
  return a;
}

namespace {
void stat_row(std::ostringstream& os, const char* name, const AggregateReport::Stat& s) {
  os << name << "\t" << s.mean << "\t" << s.sd << "\t" << s.n << "\t" << s.excluded << "\n";
}
void stat_kv(std::ostringstream& os, const std::string& prefix, const char* name,
             const AggregateReport::Stat& s) {
  os << prefix << name << "_mean=" << s.mean << "\n";
  os << prefix << name << "_sd=" << s.sd << "\n";
  os << prefix << name << "_n=" << s.n << "\n";
  os << prefix << name << "_excluded=" << s.excluded << "\n";
}
}  // namespace

std::string format_aggregate_tsv(const AggregateReport& a) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "index\tmean\tsd\tn\texcluded\n";
  stat_row(os, "jsi", a.jsi);
  stat_row(os, "dsc", a.dsc);
  stat_row(os, "sensitivity", a.sensitivity);
  stat_row(os, "specificity", a.specificity);
  stat_row(os, "mcc", a.mcc);
  return os.str();
}

std::string format_aggregate_kv(const AggregateReport& a, const std::string& prefix) {
  std::ostringstream os;
  os.precision(10);
  stat_kv(os, prefix, "jsi", a.jsi);
  stat_kv(os, prefix, "dsc", a.dsc);
  stat_kv(os, prefix, "sensitivity", a.sensitivity);
  stat_kv(os, prefix, "specificity", a.specificity);
  stat_kv(os, prefix, "mcc", a.mcc);
  os << prefix << "images=" << a.images << "\n";
  return os.str();
}

}  // namespace fcnseg
