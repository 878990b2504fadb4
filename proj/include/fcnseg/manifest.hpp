#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcnseg/mask.hpp"

namespace fcnseg {

/// One subject's ordered scan files. The acquisition protocol produces
/// either 13 or 26 sequential scans; mid-scan selection enforces that.
struct SubjectScans {
  std::string subject_id;
  std::vector<std::string> images;  // ordered scan paths
  std::vector<std::string> masks;   // parallel ground-truth paths
  int64_t scan_count() const { return static_cast<int64_t>(images.size()); }
};

/// 1-based index of the middle scan: 7 for 13-scan subjects, 13 for 26-scan
/// subjects. Other scan counts are rejected.
int select_mid_scan(const SubjectScans& subject);

enum class DatasetTag { md, wd, ad };
DatasetTag parse_dataset_tag(const std::string& name);
std::string dataset_tag_name(DatasetTag tag);

enum class Split { train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& name);

struct ManifestItem {
  std::string image;
  std::string mask;
  std::string subject;
  int scan_index = 0;  // 1-based position within the subject's scans
  Split split = Split::train;
  int fold = -1;
};

struct DatasetManifest {
  DatasetTag tag = DatasetTag::md;
  std::vector<ManifestItem> items;

  std::vector<const ManifestItem*> in_split(Split s) const;
  int64_t count(Split s) const;
};

struct SubjectPools {
  std::vector<SubjectScans> md;  // mid-scan pool (one item per subject)
  std::vector<SubjectScans> wd;  // whole-scan pool (all scans per subject)
};

/// Builds the split manifest for a dataset assembly:
///   md: one mid-scan per md-pool subject, 70/10/20 item split;
///   wd: every scan of the wd pool, test subjects grouped so no subject
///       straddles train and test, 70/10/20 overall;
///   ad: all wd items split 90/10 into train/val, every md mid-scan as test.
DatasetManifest build_manifest(DatasetTag tag, const SubjectPools& pools, uint64_t seed);

/// k manifests with pairwise-disjoint test partitions that jointly cover the
/// items; grouping is by subject, and each fold keeps the 70/10/20 shape.
std::vector<DatasetManifest> kfold_splits(const DatasetManifest& manifest, int k, uint64_t seed);

// line-oriented tab-separated persistence:
// image  mask  subject  scan_index  split  fold
void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// pool listing persistence (image  mask  subject  scan_index)
void write_pool(const std::vector<SubjectScans>& pool, const std::string& path);
std::vector<SubjectScans> read_pool(const std::string& path);

}  // namespace fcnseg
